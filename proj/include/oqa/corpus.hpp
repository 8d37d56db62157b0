#ifndef OQA_CORPUS_HPP
#define OQA_CORPUS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "oqa/common.hpp"
#include "oqa/similarity.hpp"

namespace oqa {

// Fixed token index space shared by f_q, f_a and f_r. Indices are contiguous
// 0..size-1; doc_freq counts review sentences containing each retained token.
struct Vocabulary {
    std::unordered_map<std::string, std::uint32_t> token_to_index;
    std::vector<std::string> index_to_token;
    std::vector<std::uint32_t> doc_freq;

    std::size_t size() const { return index_to_token.size(); }

    std::optional<std::uint32_t> lookup(const std::string& token) const {
        auto it = token_to_index.find(token);
        if (it == token_to_index.end()) return std::nullopt;
        return it->second;
    }
};

// One review sentence, the `expert' unit of the mixture.
struct ExpertSentence {
    std::string sentence_id;
    std::string review_id;
    std::string product_id;
    std::string reviewer_id;
    std::string text;
    std::vector<std::string> tokens;
    FeatureVector features; // f_r
    int rating = 3;         // 1..5 stars
    double h1 = 0.0;        // fraction of voters finding the review helpful
    double h2 = 0.0;        // fraction not finding it helpful; h1 + h2 <= 1
};

struct AnswerRecord {
    std::string answer_id;
    std::string text;
    std::vector<std::string> tokens;
    FeatureVector features; // f_a
    bool top_voted = false;
    int label = -1;         // y_{q,j}: 0/1 once labeled, -1 otherwise
    double label_confidence = 0.0;
};

enum class QuestionType { Unknown, Binary, Open };

struct QuestionRecord {
    std::string question_id;
    std::string product_id;
    std::string asker_id; // parsed when present; unused by any scoring formula
    std::string text;
    std::vector<std::string> tokens;
    FeatureVector features; // f_q
    QuestionType qtype = QuestionType::Unknown;
    std::vector<AnswerRecord> answers;
    int n_pos = 0;
    int n_neg = 0;
    int n_total = 0;
    bool ambiguous = false;

    // r_q; only meaningful when n_total > 0
    double pos_fraction() const {
        return n_total > 0 ? static_cast<double>(n_pos) / n_total : 0.0;
    }
};

struct Product {
    std::string product_id;
    std::string category;
};

struct IngestReport {
    std::uint64_t dropped_questions = 0; // unknown product id
    std::uint64_t dropped_answers = 0;   // unknown question id
    std::uint64_t dropped_reviews = 0;   // unknown product id
};

// Immutable after construction; scoring code only reads it.
struct Corpus {
    std::vector<Product> products;
    std::vector<QuestionRecord> questions;
    std::vector<ExpertSentence> sentences; // grouped by product, input order
    Vocabulary vocab;
    CorpusStats stats;
    IngestReport report;

    std::unordered_map<std::string, std::uint32_t> product_index;
    std::unordered_map<std::string, std::vector<std::uint32_t>> product_sentence_ids;

    // R_q: indices into `sentences` for the question's product.
    const std::vector<std::uint32_t>& sentences_for(const QuestionRecord& q) const;
};

// Lowercase tokens split on non-alphanumeric boundaries; no empty tokens.
std::vector<std::string> tokenize(const std::string& text);

// Rule-based splitter: boundaries at [.?!] runs followed by whitespace and an
// uppercase letter (or end of text), guarding decimal points and a fixed
// abbreviation list. Concatenating the output preserves every non-whitespace
// character of the input.
std::vector<std::string> split_sentences(const std::string& review_text);

// Top max_size tokens by sentence document frequency, ties lexicographic.
Vocabulary build_vocabulary(const std::vector<ExpertSentence>& sentences, std::size_t max_size);

// Term-frequency weights over in-vocabulary tokens, L2-normalized.
// All-OOV token lists produce an empty vector.
FeatureVector featurize(const std::vector<std::string>& tokens, const Vocabulary& vocab);

CorpusStats compute_stats(const std::vector<ExpertSentence>& sentences);

struct IngestOptions {
    std::size_t vocab_max_size = 5000;
};

// Loads the four JSONL inputs, splits reviews into expert sentences, builds
// the vocabulary and features, and links questions to their product's
// sentences. Records pointing at unknown parents are dropped and counted.
Corpus ingest(const std::string& products_path,
              const std::string& questions_path,
              const std::string& answers_path,
              const std::string& reviews_path,
              const IngestOptions& options = {});

// Re-derives features, stats and linkage for an in-memory corpus whose
// text/token fields are already populated. Used by ingest and the synthetic
// generator so both construct identical structures.
void finalize_corpus(Corpus& corpus, std::size_t vocab_max_size);

} // namespace oqa

#endif // OQA_CORPUS_HPP
