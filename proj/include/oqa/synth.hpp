#ifndef OQA_SYNTH_HPP
#define OQA_SYNTH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "oqa/corpus.hpp"
#include "oqa/moe.hpp"

namespace oqa {

// Planted-truth corpus: sentences carry an aspect/sentiment token structure,
// the planted model scores them, hidden answers follow Bernoulli(p_q), and
// observed labels flip with the planted sensitivity/specificity.
struct SynthSpec {
    std::size_t n_questions = 2000;
    std::size_t sentences_per_question = 30;
    std::size_t vocab_size = 500;
    std::array<double, 5> labels_per_question{0, 0, 1, 0, 0}; // P(k labels), k = 1..5
    double planted_alpha = 0.85; // P(label = 1 | y = 1)
    double planted_beta = 0.90;  // P(label = 0 | y = 0)
    double target_ambiguity_rate = 0.14; // recorded target; reported against the analytic rate
    std::uint64_t rng_seed = 1;

    // planted signal strengths; the realized ModelParams is exposed on output
    double kappa_bm25 = 0.6;
    double kappa_rouge = 0.6;
    double xi_sentiment = 5.0;
    std::size_t n_aspects = 40;
    std::size_t n_sentiment = 30; // tokens per polarity
    std::size_t n_reviewers = 200;
    double relevant_fraction = 0.35;
    // < 1 pushes per-question stance shares toward 0/1 (mostly one-sided
    // opinions with occasional splits); 1 leaves them uniform
    double stance_concentration = 0.12;
};

struct GroundTruth {
    std::string question_id;
    int y_true = 0;
    double p_true = 0.5;
};

struct SynthReview {
    std::string review_id;
    std::string product_id;
    std::string reviewer_id;
    std::string text;
    int rating = 3;
    int helpful_yes = 0;
    int helpful_total = 0;
};

struct SynthResult {
    Corpus corpus; // labels attached, counts aggregated, qtype = Binary
    std::vector<GroundTruth> truth;
    ModelParams planted; // over the built vocabulary
    std::vector<SynthReview> reviews; // raw records for JSONL emission
};

SynthResult generate(const SynthSpec& spec);

// Emits products/reviews/questions/answers JSONL plus ground_truth.jsonl.
void write_synth_jsonl(const SynthResult& result, const std::string& dir);

} // namespace oqa

#endif // OQA_SYNTH_HPP
