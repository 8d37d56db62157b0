#ifndef OQA_SIMILARITY_HPP
#define OQA_SIMILARITY_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "oqa/common.hpp"

namespace oqa {

// Sentence-level collection statistics feeding BM25. Review sentences are the
// retrieval units, so N counts sentences and avgrl is in sentence tokens.
struct CorpusStats {
    std::uint64_t total_sentences = 0;                       // N
    double avg_sentence_len = 0.0;                           // avgrl
    std::unordered_map<std::string, std::uint32_t> doc_freq; // n(t), over all tokens

    std::uint32_t df(const std::string& token) const {
        auto it = doc_freq.find(token);
        return it == doc_freq.end() ? 0u : it->second;
    }
};

// The two pairwise similarity components of s(q,r).
struct SimilarityVector {
    double bm25 = 0.0;
    double rouge_l = 0.0;
};

// max(0, ln((N - n + 0.5) / (n + 0.5))). The clamp keeps BM25 monotone in
// matches when a token appears in more than half of all sentences.
double idf(const std::string& token, const CorpusStats& stats);

// Okapi BM25 with k1 = 1.5, b = 0.75, summed over distinct question tokens.
double bm25(const std::vector<std::string>& question_tokens,
            const std::vector<std::string>& sentence_tokens,
            const CorpusStats& stats);

// LCS-based Rouge-L F score; 0 when the token sequences share no subsequence.
double rouge_l(const std::vector<std::string>& question_tokens,
               const std::vector<std::string>& sentence_tokens);

SimilarityVector similarity_vector(const std::vector<std::string>& question_tokens,
                                   const std::vector<std::string>& sentence_tokens,
                                   const CorpusStats& stats);

} // namespace oqa

#endif // OQA_SIMILARITY_HPP
