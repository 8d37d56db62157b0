#ifndef OQA_EVAL_HPP
#define OQA_EVAL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oqa/corpus.hpp"
#include "oqa/moe.hpp"

namespace oqa {

enum class Standard { Silver, Gold };

// Resolved yes/no test labels. Silver takes the majority vote and discards
// ties; gold keeps only unanimously labeled questions.
struct BinaryTestSet {
    Standard standard = Standard::Silver;
    std::vector<std::pair<std::string, int>> items; // (question_id, label)
};

BinaryTestSet build_silver(std::span<const QuestionRecord> questions);
BinaryTestSet build_gold(std::span<const QuestionRecord> questions);

// Rank-sum AUC with ties counted 0.5. Errors when a class is missing.
double auc_binary(const std::vector<std::pair<double, int>>& scored);
double auc_binary(const std::unordered_map<std::string, double>& predictions,
                  const BinaryTestSet& testset);

// Accuracy over the ceil((1-a)|Q|) most confident questions, confidence being
// |p - 0.5| with ties broken by question_id. p >= 0.5 counts as predicting 1.
double accuracy_at(const std::vector<std::tuple<std::string, double, int>>& predictions,
                   double a);
double accuracy_at(const std::unordered_map<std::string, double>& predictions,
                   const BinaryTestSet& testset, double a);

// Per question, per answer ordinal: sampled non-answer references
// (question_index, answer_index) into the corpus.
struct OpenEvalSet {
    struct Entry {
        std::uint32_t question_index = 0;
        std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> negs;
    };
    std::vector<Entry> entries;
    int neg_per_answer = 1;
    std::uint64_t rng_seed = 0;
};

// Draws neg_per_answer non-answers per answer, uniformly from the pool of all
// answers attached to the given questions, excluding the question's own.
OpenEvalSet sample_non_answers(const Corpus& corpus,
                               std::span<const std::uint32_t> question_indices,
                               int neg_per_answer, std::uint64_t seed);

// Mean over questions of mean over answers of mean over that answer's
// non-answers of the strict indicator p_{q,a>abar} > 0.5.
double auc_open(const Corpus& corpus, const ModelParams& params, const OpenEvalSet& eval_set);

// Same metric over precomputed pair probabilities [question][answer][neg].
double auc_open(const std::vector<std::vector<std::vector<double>>>& pair_probs);

// Reproducible 2:1 train/test partition keyed on question_id.
bool in_train_split(const std::string& question_id);

} // namespace oqa

#endif // OQA_EVAL_HPP
