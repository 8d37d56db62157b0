#include "oqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace oqa {

using nlohmann::json;

const std::vector<std::uint32_t>& Corpus::sentences_for(const QuestionRecord& q) const {
    static const std::vector<std::uint32_t> kEmpty;
    auto it = product_sentence_ids.find(q.product_id);
    return it == product_sentence_ids.end() ? kEmpty : it->second;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

// Abbreviations whose trailing period never ends a sentence.
const std::set<std::string>& abbreviations() {
    static const std::set<std::string> abbrev = {"mr", "mrs", "dr", "vs", "etc", "e.g", "i.e"};
    return abbrev;
}

bool is_decimal_point(const std::string& text, std::size_t i) {
    return text[i] == '.' && i > 0 && i + 1 < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
           std::isdigit(static_cast<unsigned char>(text[i + 1]));
}

// Word immediately before position i, lowercased; includes interior dots so
// "e.g." is seen whole.
std::string word_before(const std::string& text, std::size_t i) {
    std::size_t end = i;
    std::size_t start = end;
    while (start > 0) {
        const unsigned char c = static_cast<unsigned char>(text[start - 1]);
        if (std::isalnum(c) || c == '.') --start;
        else break;
    }
    std::string w = text.substr(start, end - start);
    for (auto& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    while (!w.empty() && w.back() == '.') w.pop_back();
    return w;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

std::vector<std::string> split_sentences(const std::string& review_text) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    const std::size_t n = review_text.size();

    std::size_t i = 0;
    while (i < n) {
        const char c = review_text[i];
        if (c != '.' && c != '?' && c != '!') {
            ++i;
            continue;
        }
        if (c == '.' && (is_decimal_point(review_text, i) ||
                         abbreviations().count(word_before(review_text, i)) > 0)) {
            ++i;
            continue;
        }
        // absorb a run of terminators ("?!", "...")
        std::size_t end = i + 1;
        while (end < n && (review_text[end] == '.' || review_text[end] == '?' ||
                           review_text[end] == '!')) {
            ++end;
        }
        // boundary only when followed by whitespace + uppercase, or end of text
        std::size_t ws = end;
        while (ws < n && std::isspace(static_cast<unsigned char>(review_text[ws]))) ++ws;
        const bool at_end = ws >= n;
        const bool upper_next = ws > end && ws < n &&
                                std::isupper(static_cast<unsigned char>(review_text[ws]));
        if (at_end || upper_next) {
            std::string sent = trim(review_text.substr(start, end - start));
            if (!sent.empty()) sentences.push_back(std::move(sent));
            start = ws;
            i = ws;
        } else {
            i = end;
        }
    }
    if (start < n) {
        std::string sent = trim(review_text.substr(start));
        if (!sent.empty()) sentences.push_back(std::move(sent));
    }
    return sentences;
}

Vocabulary build_vocabulary(const std::vector<ExpertSentence>& sentences, std::size_t max_size) {
    if (max_size < 1) throw DataError("build_vocabulary: max_size must be >= 1");

    std::unordered_map<std::string, std::uint32_t> df;
    std::unordered_set<std::string> seen;
    for (const auto& s : sentences) {
        seen.clear();
        for (const auto& t : s.tokens) {
            if (seen.insert(t).second) ++df[t];
        }
    }

    std::vector<std::pair<std::string, std::uint32_t>> ranked(df.begin(), df.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_size) ranked.resize(max_size);
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Vocabulary vocab;
    vocab.index_to_token.reserve(ranked.size());
    vocab.doc_freq.reserve(ranked.size());
    for (std::uint32_t i = 0; i < ranked.size(); ++i) {
        vocab.token_to_index.emplace(ranked[i].first, i);
        vocab.index_to_token.push_back(ranked[i].first);
        vocab.doc_freq.push_back(ranked[i].second);
    }
    return vocab;
}

FeatureVector featurize(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::map<std::uint32_t, double> tf; // ordered: indices come out sorted
    for (const auto& t : tokens) {
        if (auto idx = vocab.lookup(t)) tf[*idx] += 1.0;
    }
    FeatureVector fv;
    if (tf.empty()) return fv;
    double sq = 0.0;
    for (const auto& [idx, w] : tf) sq += w * w;
    const double inv = 1.0 / std::sqrt(sq);
    fv.indices.reserve(tf.size());
    fv.weights.reserve(tf.size());
    for (const auto& [idx, w] : tf) {
        fv.indices.push_back(idx);
        fv.weights.push_back(w * inv);
    }
    return fv;
}

CorpusStats compute_stats(const std::vector<ExpertSentence>& sentences) {
    CorpusStats stats;
    stats.total_sentences = sentences.size();
    std::uint64_t total_len = 0;
    std::unordered_set<std::string> seen;
    for (const auto& s : sentences) {
        total_len += s.tokens.size();
        seen.clear();
        for (const auto& t : s.tokens) {
            if (seen.insert(t).second) ++stats.doc_freq[t];
        }
    }
    stats.avg_sentence_len =
        sentences.empty() ? 0.0 : static_cast<double>(total_len) / sentences.size();
    return stats;
}

void finalize_corpus(Corpus& corpus, std::size_t vocab_max_size) {
    for (auto& s : corpus.sentences) {
        if (s.tokens.empty()) s.tokens = tokenize(s.text);
    }
    for (auto& q : corpus.questions) {
        if (q.tokens.empty()) q.tokens = tokenize(q.text);
        for (auto& a : q.answers) {
            if (a.tokens.empty()) a.tokens = tokenize(a.text);
        }
    }

    corpus.vocab = build_vocabulary(corpus.sentences, vocab_max_size);
    corpus.stats = compute_stats(corpus.sentences);

    for (auto& s : corpus.sentences) s.features = featurize(s.tokens, corpus.vocab);
    for (auto& q : corpus.questions) {
        q.features = featurize(q.tokens, corpus.vocab);
        for (auto& a : q.answers) a.features = featurize(a.tokens, corpus.vocab);
    }

    corpus.product_index.clear();
    for (std::uint32_t i = 0; i < corpus.products.size(); ++i) {
        corpus.product_index.emplace(corpus.products[i].product_id, i);
    }
    corpus.product_sentence_ids.clear();
    for (std::uint32_t i = 0; i < corpus.sentences.size(); ++i) {
        corpus.product_sentence_ids[corpus.sentences[i].product_id].push_back(i);
    }
}

namespace {

// Applies fn to each parsed JSONL object; errors carry file and line number.
void for_each_jsonl(const std::string& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": malformed JSON: " + e.what());
        }
        fn(obj, lineno);
    }
}

std::string require_string(const json& obj, const char* key, const std::string& path,
                           std::size_t lineno) {
    if (!obj.contains(key) || !obj[key].is_string()) {
        throw DataError(path + ":" + std::to_string(lineno) + ": missing string field '" +
                        key + "'");
    }
    return obj[key].get<std::string>();
}

std::int64_t require_int(const json& obj, const char* key, const std::string& path,
                         std::size_t lineno) {
    if (!obj.contains(key) || !obj[key].is_number_integer()) {
        throw DataError(path + ":" + std::to_string(lineno) + ": missing integer field '" +
                        key + "'");
    }
    return obj[key].get<std::int64_t>();
}

} // namespace

Corpus ingest(const std::string& products_path,
              const std::string& questions_path,
              const std::string& answers_path,
              const std::string& reviews_path,
              const IngestOptions& options) {
    Corpus corpus;

    std::unordered_set<std::string> product_ids;
    for_each_jsonl(products_path, [&](const json& obj, std::size_t lineno) {
        Product p;
        p.product_id = require_string(obj, "product_id", products_path, lineno);
        p.category = require_string(obj, "category", products_path, lineno);
        if (!product_ids.insert(p.product_id).second) {
            throw DataError(products_path + ":" + std::to_string(lineno) +
                            ": duplicate product_id '" + p.product_id + "'");
        }
        corpus.products.push_back(std::move(p));
    });

    std::unordered_set<std::string> review_ids;
    for_each_jsonl(reviews_path, [&](const json& obj, std::size_t lineno) {
        const std::string review_id = require_string(obj, "review_id", reviews_path, lineno);
        if (!review_ids.insert(review_id).second) {
            throw DataError(reviews_path + ":" + std::to_string(lineno) +
                            ": duplicate review_id '" + review_id + "'");
        }
        const std::string product_id = require_string(obj, "product_id", reviews_path, lineno);
        if (product_ids.count(product_id) == 0) {
            ++corpus.report.dropped_reviews;
            return;
        }
        const std::string reviewer_id = require_string(obj, "reviewer_id", reviews_path, lineno);
        const std::string text = require_string(obj, "text", reviews_path, lineno);
        const std::int64_t rating = require_int(obj, "rating", reviews_path, lineno);
        if (rating < 1 || rating > 5) {
            throw DataError(reviews_path + ":" + std::to_string(lineno) +
                            ": rating out of range 1..5");
        }
        const std::int64_t helpful_yes = require_int(obj, "helpful_yes", reviews_path, lineno);
        const std::int64_t helpful_total =
            require_int(obj, "helpful_total", reviews_path, lineno);
        if (helpful_yes < 0 || helpful_total < 0 || helpful_yes > helpful_total) {
            throw DataError(reviews_path + ":" + std::to_string(lineno) +
                            ": inconsistent helpfulness counts");
        }
        double h1 = 0.0, h2 = 0.0;
        if (helpful_total > 0) {
            h1 = static_cast<double>(helpful_yes) / static_cast<double>(helpful_total);
            h2 = static_cast<double>(helpful_total - helpful_yes) /
                 static_cast<double>(helpful_total);
        }

        const auto sentence_texts = split_sentences(text);
        for (std::size_t k = 0; k < sentence_texts.size(); ++k) {
            ExpertSentence s;
            s.sentence_id = review_id + "#" + std::to_string(k);
            s.review_id = review_id;
            s.product_id = product_id;
            s.reviewer_id = reviewer_id;
            s.text = sentence_texts[k];
            s.rating = static_cast<int>(rating);
            s.h1 = h1;
            s.h2 = h2;
            corpus.sentences.push_back(std::move(s));
        }
    });

    std::unordered_map<std::string, std::uint32_t> question_pos;
    for_each_jsonl(questions_path, [&](const json& obj, std::size_t lineno) {
        QuestionRecord q;
        q.question_id = require_string(obj, "question_id", questions_path, lineno);
        if (question_pos.count(q.question_id) > 0) {
            throw DataError(questions_path + ":" + std::to_string(lineno) +
                            ": duplicate question_id '" + q.question_id + "'");
        }
        q.product_id = require_string(obj, "product_id", questions_path, lineno);
        q.text = require_string(obj, "text", questions_path, lineno);
        if (obj.contains("asker_id") && obj["asker_id"].is_string()) {
            q.asker_id = obj["asker_id"].get<std::string>();
        }
        if (product_ids.count(q.product_id) == 0) {
            ++corpus.report.dropped_questions;
            question_pos.emplace(q.question_id, UINT32_MAX); // remember id for answer drops
            return;
        }
        question_pos.emplace(q.question_id, static_cast<std::uint32_t>(corpus.questions.size()));
        corpus.questions.push_back(std::move(q));
    });

    std::unordered_set<std::string> answer_ids;
    for_each_jsonl(answers_path, [&](const json& obj, std::size_t lineno) {
        AnswerRecord a;
        a.answer_id = require_string(obj, "answer_id", answers_path, lineno);
        if (!answer_ids.insert(a.answer_id).second) {
            throw DataError(answers_path + ":" + std::to_string(lineno) +
                            ": duplicate answer_id '" + a.answer_id + "'");
        }
        const std::string question_id = require_string(obj, "question_id", answers_path, lineno);
        a.text = require_string(obj, "text", answers_path, lineno);
        if (obj.contains("top_voted")) {
            if (!obj["top_voted"].is_boolean()) {
                throw DataError(answers_path + ":" + std::to_string(lineno) +
                                ": top_voted must be a boolean");
            }
            a.top_voted = obj["top_voted"].get<bool>();
        }
        auto it = question_pos.find(question_id);
        if (it == question_pos.end() || it->second == UINT32_MAX) {
            ++corpus.report.dropped_answers;
            return;
        }
        corpus.questions[it->second].answers.push_back(std::move(a));
    });

    finalize_corpus(corpus, options.vocab_max_size);
    return corpus;
}

} // namespace oqa
