#include "oqa/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace oqa {

namespace {
constexpr double kBm25K1 = 1.5;
constexpr double kBm25B = 0.75;
} // namespace

double idf(const std::string& token, const CorpusStats& stats) {
    const double n = static_cast<double>(stats.df(token));
    const double N = static_cast<double>(stats.total_sentences);
    const double raw = std::log((N - n + 0.5) / (n + 0.5));
    return std::max(0.0, raw);
}

double bm25(const std::vector<std::string>& question_tokens,
            const std::vector<std::string>& sentence_tokens,
            const CorpusStats& stats) {
    if (question_tokens.empty() || sentence_tokens.empty()) return 0.0;

    std::unordered_map<std::string, int> sent_tf;
    for (const auto& t : sentence_tokens) ++sent_tf[t];

    const double len_ratio =
        stats.avg_sentence_len > 0.0
            ? static_cast<double>(sentence_tokens.size()) / stats.avg_sentence_len
            : 1.0;
    const double norm = kBm25K1 * (1.0 - kBm25B + kBm25B * len_ratio);

    double score = 0.0;
    std::unordered_map<std::string, bool> seen;
    for (const auto& qt : question_tokens) {
        if (!seen.emplace(qt, true).second) continue; // distinct query terms
        auto it = sent_tf.find(qt);
        if (it == sent_tf.end()) continue;
        const double f = static_cast<double>(it->second);
        score += idf(qt, stats) * f * (kBm25K1 + 1.0) / (f + norm);
    }
    return score;
}

namespace {

// Token-level LCS length, O(|a| * |b|) with a rolling row.
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) {
                cur[j] = prev[j - 1] + 1;
            } else {
                cur[j] = std::max(prev[j], cur[j - 1]);
            }
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace

double rouge_l(const std::vector<std::string>& question_tokens,
               const std::vector<std::string>& sentence_tokens) {
    const std::size_t lcs = lcs_length(question_tokens, sentence_tokens);
    if (lcs == 0) return 0.0; // beta undefined; resolved to F = 0

    const double R = static_cast<double>(lcs) / static_cast<double>(question_tokens.size());
    const double P = static_cast<double>(lcs) / static_cast<double>(sentence_tokens.size());
    // F with beta = P/R collapses to RP(R^2 + P^2) / (R^3 + P^3), symmetric in (R, P).
    const double num = R * P * (R * R + P * P);
    const double den = R * R * R + P * P * P;
    return num / den;
}

SimilarityVector similarity_vector(const std::vector<std::string>& question_tokens,
                                   const std::vector<std::string>& sentence_tokens,
                                   const CorpusStats& stats) {
    return SimilarityVector{bm25(question_tokens, sentence_tokens, stats),
                            rouge_l(question_tokens, sentence_tokens)};
}

} // namespace oqa
