#ifndef OQA_MOE_HPP
#define OQA_MOE_HPP

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "oqa/corpus.hpp"
#include "oqa/similarity.hpp"

namespace oqa {

enum class Variant { MoE, KlMoE, EmMoE, EmMoES, SMoE, MMoE, MMoES };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// s-MoE / m-MoE / m-MoE-S rank answers; the rest predict yes/no.
inline bool is_open_variant(Variant v) {
    return v == Variant::SMoE || v == Variant::MMoE || v == Variant::MMoES;
}
inline bool is_em_variant(Variant v) { return v == Variant::EmMoE || v == Variant::EmMoES; }
inline bool is_subjective_variant(Variant v) { return v == Variant::EmMoES || v == Variant::MMoES; }

// All learned weights. Vector blocks are dimensioned by the vocabulary;
// gamma vectors carry one extra trailing bias coordinate. In non-subjective
// variants g, c, expertise and bias stay identically zero and are excluded
// from the trainable parameter count (same for gamma outside EM variants).
struct ModelParams {
    Variant variant = Variant::MoE;
    double lambda = 1e-3;
    std::size_t vocab_size = 0;

    std::array<double, 2> kappa{0.0, 0.0};  // over (bm25, rouge_l)
    std::vector<double> eta;                // relevance term-to-term
    std::vector<double> mu;                 // prediction question/review interaction
    std::vector<double> xi;                 // prediction from review text alone
    std::vector<double> gamma1;             // sensitivity, size vocab+1
    std::vector<double> gamma2;             // specificity, size vocab+1
    std::array<double, 2> g{0.0, 0.0};      // helpfulness features
    double c = 0.0;                         // rating amplifier weight
    std::map<std::string, double> expertise; // e_u
    std::map<std::string, double> bias;      // b_u

    static ModelParams zeros(Variant variant, std::size_t vocab_size, double lambda = 1e-3);

    double expertise_of(const std::string& reviewer) const;
    double bias_of(const std::string& reviewer) const;
};

// Star ratings enter the amplifier centered: 3 stars is neutral, 5 stars +1.
inline double center_rating(int stars) { return (static_cast<double>(stars) - 3.0) / 2.0; }

// Everything about one (question, sentence) pair the score kernels consume.
// Training precomputes these; the convenience overloads below build them on
// the fly.
struct PairFeatures {
    SimilarityVector sim;
    FeatureVector had_qr; // f_q o f_r
    const FeatureVector* f_r = nullptr;
    double h1 = 0.0, h2 = 0.0;
    double rt_centered = 0.0;
    double e_u = 0.0, b_u = 0.0; // resolved user parameters (0 when unknown)
};

// v_{q,r}: <kappa, s(q,r)> + <eta, f_q o f_r> (+ <g, h_r> + e_u when subjective)
double relevance_kernel(std::span<const double, 2> kappa, std::span<const double> eta,
                        std::span<const double, 2> g, const PairFeatures& pf, bool subjective);

// w_{q,r}: <mu, f_q o f_r> + <xi, f_r>, times (1 + c*rt + b_u) when subjective.
double prediction_kernel(std::span<const double> mu, std::span<const double> xi,
                         double c, const PairFeatures& pf, bool subjective);

// w_{a>abar,r}: <mu, (f_a - f_abar) o f_r>, same amplifier when subjective.
double pair_prediction_kernel(std::span<const double> mu, const FeatureVector& diff_had,
                              double c, const PairFeatures& pf, bool subjective);

PairFeatures make_pair_features(const QuestionRecord& q, const ExpertSentence& r,
                                const CorpusStats& stats, const ModelParams& params);

double relevance_score(const QuestionRecord& q, const ExpertSentence& r,
                       const CorpusStats& stats, const ModelParams& params, bool subjective);
double prediction_score_binary(const QuestionRecord& q, const ExpertSentence& r,
                               const CorpusStats& stats, const ModelParams& params,
                               bool subjective);
double answer_pair_score(const AnswerRecord& answer, const AnswerRecord& non_answer,
                         const ExpertSentence& r, const ModelParams& params, bool subjective);

// Softmax of v with max subtraction; errors on an empty sentence list.
std::vector<double> softmax_weights(const std::vector<double>& scores);

std::vector<double> relevance_weights(const QuestionRecord& q,
                                      const std::vector<const ExpertSentence*>& sentences,
                                      const CorpusStats& stats, const ModelParams& params);

struct MixtureOutput {
    std::vector<double> weights;      // P(r|X_q), sums to 1
    std::vector<double> expert_preds; // sigma(w) per sentence
    double combined = 0.5;            // p_q or p_{q,a>abar}
};

MixtureOutput predict_binary(const QuestionRecord& q,
                             const std::vector<const ExpertSentence*>& sentences,
                             const CorpusStats& stats, const ModelParams& params);

MixtureOutput predict_preference(const QuestionRecord& q, const AnswerRecord& answer,
                                 const AnswerRecord& non_answer,
                                 const std::vector<const ExpertSentence*>& sentences,
                                 const CorpusStats& stats, const ModelParams& params);

struct RankedSentence {
    const ExpertSentence* sentence = nullptr;
    double weight = 0.0;
    double expert_pred = 0.5;
};

// Sentences by relevance weight descending, ties by sentence_id, top_k kept.
std::vector<RankedSentence> rank_reviews(const QuestionRecord& q,
                                         const std::vector<const ExpertSentence*>& sentences,
                                         const CorpusStats& stats, const ModelParams& params,
                                         std::size_t top_k);

} // namespace oqa

#endif // OQA_MOE_HPP
