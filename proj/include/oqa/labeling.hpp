#ifndef OQA_LABELING_HPP
#define OQA_LABELING_HPP

#include <string>
#include <vector>

#include "oqa/corpus.hpp"

namespace oqa {

// Rule-based yes/no question detector: after stripping leading discourse
// fillers, the first token must be an auxiliary/modal verb and the text must
// be question-shaped (ends with '?', or carries no terminal punctuation).
// Tuned for precision; recall is expendable.
bool is_binary_question(const std::string& text);

struct SeedAnswer {
    std::string text;
    int label = 0; // 1 = yes, 0 = no
};

std::vector<SeedAnswer> load_seed_answers(const std::string& path);

// Logistic regression over unigram features plus first-word yes/no indicators
// and a bias.
struct LabelerModel {
    std::size_t vocab_size = 0;
    std::vector<double> weights; // vocab + [yes, no, bias]

    double raw_score(const std::vector<std::string>& tokens, const FeatureVector& features) const;
    double probability(const std::vector<std::string>& tokens, const FeatureVector& features) const;
};

struct LabelerConfig {
    double lambda = 1e-3;
    int lbfgs_max_iters = 200;
    double lbfgs_grad_tol = 1e-7;
};

LabelerModel train_answer_labeler(const std::vector<SeedAnswer>& seeds, const Vocabulary& vocab,
                                  const LabelerConfig& config = {});

struct LabeledAnswer {
    std::string answer_id;
    int label = 0;
    double confidence = 0.5; // 0.5 + |sigma(score) - 0.5|, in [0.5, 1]
};

// Marks questions binary/open via the detector. Returns the binary count.
std::size_t detect_binary_questions(Corpus& corpus);

// Scores every answer of every binary question and keeps the
// ceil(keep_fraction * eligible) most confident ones.
std::vector<LabeledAnswer> label_answers(const Corpus& corpus, const LabelerModel& labeler,
                                         double keep_fraction);

// Attaches the kept labels that belong to this question and refreshes
// n_pos / n_neg / n_total / ambiguous.
void aggregate_labels(QuestionRecord& question, const std::vector<LabeledAnswer>& kept);

// aggregate_labels over the whole corpus.
void apply_labels(Corpus& corpus, const std::vector<LabeledAnswer>& kept);

} // namespace oqa

#endif // OQA_LABELING_HPP
