#include "oqa/moe.hpp"

#include <algorithm>
#include <cmath>

namespace oqa {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::MoE: return "moe";
        case Variant::KlMoE: return "kl-moe";
        case Variant::EmMoE: return "em-moe";
        case Variant::EmMoES: return "em-moe-s";
        case Variant::SMoE: return "s-moe";
        case Variant::MMoE: return "m-moe";
        case Variant::MMoES: return "m-moe-s";
    }
    return "moe";
}

Variant variant_from_name(const std::string& name) {
    if (name == "moe") return Variant::MoE;
    if (name == "kl-moe") return Variant::KlMoE;
    if (name == "em-moe") return Variant::EmMoE;
    if (name == "em-moe-s") return Variant::EmMoES;
    if (name == "s-moe") return Variant::SMoE;
    if (name == "m-moe") return Variant::MMoE;
    if (name == "m-moe-s") return Variant::MMoES;
    throw DataError("unknown variant '" + name + "'");
}

ModelParams ModelParams::zeros(Variant variant, std::size_t vocab_size, double lambda) {
    ModelParams p;
    p.variant = variant;
    p.lambda = lambda;
    p.vocab_size = vocab_size;
    p.eta.assign(vocab_size, 0.0);
    p.mu.assign(vocab_size, 0.0);
    p.xi.assign(vocab_size, 0.0);
    if (is_em_variant(variant)) {
        p.gamma1.assign(vocab_size + 1, 0.0);
        p.gamma2.assign(vocab_size + 1, 0.0);
    }
    return p;
}

double ModelParams::expertise_of(const std::string& reviewer) const {
    auto it = expertise.find(reviewer);
    return it == expertise.end() ? 0.0 : it->second;
}

double ModelParams::bias_of(const std::string& reviewer) const {
    auto it = bias.find(reviewer);
    return it == bias.end() ? 0.0 : it->second;
}

double relevance_kernel(std::span<const double, 2> kappa, std::span<const double> eta,
                        std::span<const double, 2> g, const PairFeatures& pf, bool subjective) {
    double v = kappa[0] * pf.sim.bm25 + kappa[1] * pf.sim.rouge_l + dot(eta, pf.had_qr);
    if (subjective) {
        v += g[0] * pf.h1 + g[1] * pf.h2 + pf.e_u;
    }
    return v;
}

double prediction_kernel(std::span<const double> mu, std::span<const double> xi,
                         double c, const PairFeatures& pf, bool subjective) {
    const double base = dot(mu, pf.had_qr) + dot(xi, *pf.f_r);
    if (!subjective) return base;
    return base * (1.0 + c * pf.rt_centered + pf.b_u);
}

double pair_prediction_kernel(std::span<const double> mu, const FeatureVector& diff_had,
                              double c, const PairFeatures& pf, bool subjective) {
    const double base = dot(mu, diff_had);
    if (!subjective) return base;
    return base * (1.0 + c * pf.rt_centered + pf.b_u);
}

PairFeatures make_pair_features(const QuestionRecord& q, const ExpertSentence& r,
                                const CorpusStats& stats, const ModelParams& params) {
    PairFeatures pf;
    pf.sim = similarity_vector(q.tokens, r.tokens, stats);
    pf.had_qr = hadamard(q.features, r.features);
    pf.f_r = &r.features;
    pf.h1 = r.h1;
    pf.h2 = r.h2;
    pf.rt_centered = center_rating(r.rating);
    pf.e_u = params.expertise_of(r.reviewer_id);
    pf.b_u = params.bias_of(r.reviewer_id);
    return pf;
}

double relevance_score(const QuestionRecord& q, const ExpertSentence& r,
                       const CorpusStats& stats, const ModelParams& params, bool subjective) {
    const PairFeatures pf = make_pair_features(q, r, stats, params);
    return relevance_kernel(std::span<const double, 2>(params.kappa), params.eta,
                            std::span<const double, 2>(params.g), pf, subjective);
}

double prediction_score_binary(const QuestionRecord& q, const ExpertSentence& r,
                               const CorpusStats& stats, const ModelParams& params,
                               bool subjective) {
    const PairFeatures pf = make_pair_features(q, r, stats, params);
    return prediction_kernel(params.mu, params.xi, params.c, pf, subjective);
}

double answer_pair_score(const AnswerRecord& answer, const AnswerRecord& non_answer,
                         const ExpertSentence& r, const ModelParams& params, bool subjective) {
    // <mu, (f_a - f_abar) o f_r> accumulated over the union of answer indices
    const FeatureVector had_a = hadamard(answer.features, r.features);
    const FeatureVector had_na = hadamard(non_answer.features, r.features);
    double base = dot(params.mu, had_a) - dot(params.mu, had_na);
    if (!subjective) return base;
    const double amp =
        1.0 + params.c * center_rating(r.rating) + params.bias_of(r.reviewer_id);
    return base * amp;
}

std::vector<double> softmax_weights(const std::vector<double>& scores) {
    if (scores.empty()) throw DataError("no reviews for product");
    const double m = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w(scores.size());
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        w[i] = std::exp(scores[i] - m);
        z += w[i];
    }
    for (auto& x : w) x /= z;
    return w;
}

std::vector<double> relevance_weights(const QuestionRecord& q,
                                      const std::vector<const ExpertSentence*>& sentences,
                                      const CorpusStats& stats, const ModelParams& params) {
    const bool subjective = is_subjective_variant(params.variant);
    std::vector<double> v;
    v.reserve(sentences.size());
    for (const auto* s : sentences) {
        v.push_back(relevance_score(q, *s, stats, params, subjective));
    }
    return softmax_weights(v);
}

MixtureOutput predict_binary(const QuestionRecord& q,
                             const std::vector<const ExpertSentence*>& sentences,
                             const CorpusStats& stats, const ModelParams& params) {
    const bool subjective = is_subjective_variant(params.variant);
    MixtureOutput out;
    out.weights = relevance_weights(q, sentences, stats, params);
    out.expert_preds.reserve(sentences.size());
    double p = 0.0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const double w = prediction_score_binary(q, *sentences[i], stats, params, subjective);
        const double pred = sigmoid(w);
        out.expert_preds.push_back(pred);
        p += out.weights[i] * pred;
    }
    out.combined = p;
    return out;
}

MixtureOutput predict_preference(const QuestionRecord& q, const AnswerRecord& answer,
                                 const AnswerRecord& non_answer,
                                 const std::vector<const ExpertSentence*>& sentences,
                                 const CorpusStats& stats, const ModelParams& params) {
    const bool subjective = is_subjective_variant(params.variant);
    MixtureOutput out;
    out.weights = relevance_weights(q, sentences, stats, params);
    out.expert_preds.reserve(sentences.size());
    double p = 0.0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const double w = answer_pair_score(answer, non_answer, *sentences[i], params, subjective);
        const double pred = sigmoid(w);
        out.expert_preds.push_back(pred);
        p += out.weights[i] * pred;
    }
    out.combined = p;
    return out;
}

std::vector<RankedSentence> rank_reviews(const QuestionRecord& q,
                                         const std::vector<const ExpertSentence*>& sentences,
                                         const CorpusStats& stats, const ModelParams& params,
                                         std::size_t top_k) {
    if (top_k < 1) throw DataError("rank_reviews: top_k must be >= 1");
    const MixtureOutput mix = predict_binary(q, sentences, stats, params);
    std::vector<RankedSentence> ranked(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        ranked[i] = RankedSentence{sentences[i], mix.weights[i], mix.expert_preds[i]};
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedSentence& a, const RankedSentence& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.sentence->sentence_id < b.sentence->sentence_id;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    return ranked;
}

} // namespace oqa
