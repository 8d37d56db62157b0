#ifndef OQA_TRAIN_HPP
#define OQA_TRAIN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oqa/corpus.hpp"
#include "oqa/lbfgs.hpp"
#include "oqa/moe.hpp"

namespace oqa {

// How the single-label objective picks its one label per question.
enum class SingleLabelPolicy { TopVoted, Random, First };

struct TrainConfig {
    Variant variant = Variant::MoE;
    double lambda = 1e-3; // L2 strength, applied to every active parameter
    int lbfgs_memory = 10;
    int lbfgs_max_iters = 200;
    double lbfgs_grad_tol = 1e-6;
    int em_max_rounds = 50;
    double em_rel_tol = 1e-6;
    int neg_samples_per_answer = 1;
    std::uint64_t rng_seed = 1;
    int threads = 1;
    SingleLabelPolicy single_label_policy = SingleLabelPolicy::TopVoted;
    bool verbose = false;
};

// Flat parameter vector layout for one (variant, vocab, users) combination.
// Only the blocks a variant trains are materialized; everything else stays at
// its ModelParams default (zero).
struct ParamLayout {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    Variant variant = Variant::MoE;
    std::size_t vocab = 0;
    std::size_t n_users = 0;

    std::size_t kappa = 0; // always present, size 2
    std::size_t eta = npos;
    std::size_t mu = npos;
    std::size_t xi = npos;     // binary variants
    std::size_t gamma1 = npos; // EM variants, size vocab + 1 (trailing bias)
    std::size_t gamma2 = npos;
    std::size_t g = npos; // subjective variants
    std::size_t c = npos;
    std::size_t e = npos; // per-user expertise, size n_users
    std::size_t b = npos; // per-user bias, size n_users

    std::size_t total = 0;

    static ParamLayout make(Variant v, std::size_t vocab, std::size_t n_users);

    bool has(std::size_t off) const { return off != npos; }

    std::vector<double> pack(const ModelParams& p, const std::vector<std::string>& users) const;
    ModelParams unpack(std::span<const double> theta, const std::vector<std::string>& users,
                       double lambda) const;

    // All-zero start except the gamma bias coordinates, which begin at
    // sigmoid^-1(0.8): labels are assumed mostly faithful a priori.
    std::vector<double> initial_point() const;
};

// Precomputed per-(question, sentence) inputs so objective evaluations run
// over flat arrays instead of re-deriving similarities and Hadamard products.
struct SentenceData {
    std::uint32_t sentence_index = 0;
    SimilarityVector sim;
    FeatureVector had_qr; // f_q o f_r
    FeatureVector f_r;
    double h1 = 0.0, h2 = 0.0;
    double rt_centered = 0.0;
    std::int32_t user = -1; // index into TrainData::users, -1 when absent
};

// One (answer, non-answer) preference pair with its per-sentence products.
struct PairData {
    std::uint32_t answer_ordinal = 0;
    std::vector<FeatureVector> diff_had; // (f_a - f_abar) o f_r, per sentence
};

struct QuestionData {
    std::uint32_t question_index = 0;
    FeatureVector f_q;
    std::vector<SentenceData> sentences;
    int n_pos = 0;
    int n_neg = 0;
    int y_single = -1; // single-label target, -1 when unavailable
    double r_q = 0.0;
    std::uint32_t n_answers = 0;     // |A_q| among answers with features
    std::uint32_t single_answer = 0; // ordinal used by the single-answer objective
    std::vector<PairData> pairs;
};

struct TrainData {
    std::vector<QuestionData> questions;
    std::vector<std::string> users; // sorted distinct reviewer ids
    std::size_t vocab = 0;
    std::uint64_t skipped_no_sentences = 0;
};

struct TrainDataOptions {
    bool build_pairs = false;
    int neg_samples_per_answer = 1;
    std::uint64_t seed = 1;
    SingleLabelPolicy single_label_policy = SingleLabelPolicy::TopVoted;
};

TrainData build_train_data(const Corpus& corpus, std::span<const std::uint32_t> question_indices,
                           const TrainDataOptions& options = {});

enum class BinaryMode { Single, Kl, EmComplete };

// Value/gradient oracle in minimization form: f = -(loglik - lambda*||theta||^2).
// Questions lacking what a mode needs (labels, answers) are skipped.
class TrainObjective {
public:
    static TrainObjective binary(const TrainData& data, const ParamLayout& layout,
                                 BinaryMode mode, bool subjective, double lambda, int threads = 1);
    static TrainObjective open(const TrainData& data, const ParamLayout& layout, bool multi,
                               bool subjective, double lambda, int threads = 1);

    // EmComplete posteriors, one entry per question in TrainData order
    // (ignored entries may hold anything for non-EM-applicable questions).
    void set_posteriors(std::vector<double> t);

    double operator()(std::span<const double> theta, std::span<double> grad) const;

    std::size_t dimension() const { return layout_->total; }

private:
    TrainObjective() = default;
    const TrainData* data_ = nullptr;
    const ParamLayout* layout_ = nullptr;
    bool open_ = false;
    BinaryMode mode_ = BinaryMode::Single;
    bool multi_ = false;
    bool subjective_ = false;
    double lambda_ = 0.0;
    int threads_ = 1;
    std::vector<double> posteriors_;
};

struct EMState {
    std::vector<double> t;     // posterior P(y_q = 1 | labels), per TrainData question
    std::vector<double> alpha; // sensitivity per question
    std::vector<double> beta;  // specificity per question
    std::vector<double> observed_loglik; // penalized monitor history across rounds
};

// Per-question sensitivity/specificity under gamma: sigma(<gamma, [f_q;1]>).
void sensitivity_specificity(const FeatureVector& f_q, std::span<const double> gamma1,
                             std::span<const double> gamma2, std::size_t vocab,
                             double& alpha_out, double& beta_out);

// log a_q = n+ log(alpha) + n- log(1-alpha); log b_q analogous. Log space.
void label_joint_log(double z1, double z2, int n_pos, int n_neg, double& log_a, double& log_b);

// Posterior t_q = a p / (a p + b (1 - p)), computed with log-sum-exp.
double posterior_t(double log_a, double log_b, double p);

EMState e_step(const TrainData& data, const ParamLayout& layout,
               std::span<const double> theta, bool subjective);

// Eq.-14-style marginal with the L2 penalty subtracted; this is the quantity
// the EM loop is guaranteed not to decrease.
double observed_loglik(const TrainData& data, const ParamLayout& layout,
                       std::span<const double> theta, bool subjective, double lambda);

struct TrainResult {
    ModelParams params;
    std::vector<std::string> users;
    EMState em_state;                     // populated for EM variants
    std::vector<double> objective_history; // maximized loglik per L-BFGS run / EM round
    int total_lbfgs_iterations = 0;
    bool line_search_warning = false;
    double final_loglik = 0.0;
};

// Dispatches on config.variant: plain L-BFGS for MoE/KL-MoE/s-MoE/m-MoE(-S),
// the EM outer loop for EM-MoE(-S).
TrainResult train_model(const Corpus& corpus, std::span<const std::uint32_t> question_indices,
                        const TrainConfig& config);

// Deterministic splitmix64 stream; keeps every sampling decision reproducible
// across platforms and standard libraries.
struct Rng {
    std::uint64_t state = 0x853c49e6748fea9bULL;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    std::uint64_t uniform_int(std::uint64_t n) { // unbiased rejection sampling
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }
};

// Stream derivation for (seed, index) substreams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    Rng r(seed ^ (0x517cc1b727220a95ULL * (index + 1)));
    return r.next();
}

} // namespace oqa

#endif // OQA_TRAIN_HPP
