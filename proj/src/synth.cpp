#include "oqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "oqa/train.hpp"

namespace oqa {

namespace {

std::string padded(const char* prefix, std::size_t i, int width) {
    std::string num = std::to_string(i);
    std::string out = prefix;
    for (int k = static_cast<int>(num.size()); k < width; ++k) out.push_back('0');
    return out + num;
}

struct TokenSpace {
    std::vector<std::string> aspects, pos, neg, fillers;
    std::vector<double> filler_cdf; // Zipf(1.1)

    const std::string& sample_filler(Rng& rng) const {
        const double u = rng.uniform() * filler_cdf.back();
        const auto it = std::upper_bound(filler_cdf.begin(), filler_cdf.end(), u);
        std::size_t idx = static_cast<std::size_t>(it - filler_cdf.begin());
        if (idx >= fillers.size()) idx = fillers.size() - 1;
        return fillers[idx];
    }
};

TokenSpace make_token_space(const SynthSpec& spec) {
    const std::size_t reserved = spec.n_aspects + 2 * spec.n_sentiment;
    if (spec.vocab_size < reserved + 10) {
        throw DataError("synth: vocab_size too small for the aspect/sentiment layout");
    }
    TokenSpace ts;
    for (std::size_t i = 0; i < spec.n_aspects; ++i) ts.aspects.push_back(padded("asp", i, 3));
    for (std::size_t i = 0; i < spec.n_sentiment; ++i) ts.pos.push_back(padded("pos", i, 3));
    for (std::size_t i = 0; i < spec.n_sentiment; ++i) ts.neg.push_back(padded("neg", i, 3));
    const std::size_t n_fillers = spec.vocab_size - reserved;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_fillers; ++i) {
        ts.fillers.push_back(padded("w", i, 4));
        acc += 1.0 / std::pow(static_cast<double>(i + 1), 1.1);
        ts.filler_cdf.push_back(acc);
    }
    return ts;
}

std::string render_sentence(const std::vector<std::string>& tokens) {
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) text.push_back(' ');
        text += tokens[i];
    }
    if (!text.empty()) text[0] = static_cast<char>(std::toupper(text[0]));
    text.push_back('.');
    return text;
}

int sample_label_count(const std::array<double, 5>& dist, Rng& rng) {
    double total = 0.0;
    for (double w : dist) total += w;
    if (total <= 0.0) return 3;
    double u = rng.uniform() * total;
    for (int k = 0; k < 5; ++k) {
        u -= dist[k];
        if (u < 0.0) return k + 1;
    }
    return 5;
}

} // namespace

SynthResult generate(const SynthSpec& spec) {
    const TokenSpace ts = make_token_space(spec);
    SynthResult result;
    Corpus& corpus = result.corpus;

    struct QuestionPlan {
        double stance_pos = 0.5;
    };
    std::vector<QuestionPlan> plans(spec.n_questions);

    // pass 1: all text
    for (std::size_t qi = 0; qi < spec.n_questions; ++qi) {
        Rng rng(derive_seed(spec.rng_seed, qi));
        const std::string product_id = padded("p", qi, 5);
        const std::string question_id = padded("q", qi, 5);
        corpus.products.push_back(Product{product_id, "synthetic"});

        const std::string& aspect = ts.aspects[rng.uniform_int(ts.aspects.size())];
        {
            const double v = 2.0 * rng.uniform() - 1.0;
            const double pushed =
                std::copysign(std::pow(std::fabs(v), spec.stance_concentration), v);
            plans[qi].stance_pos = 0.5 * (1.0 + pushed);
        }

        QuestionRecord q;
        q.question_id = question_id;
        q.product_id = product_id;
        q.qtype = QuestionType::Binary;
        std::vector<std::string> q_tokens = {"is", "it", aspect};
        const std::size_t n_q_fill = 2 + rng.uniform_int(3);
        for (std::size_t k = 0; k < n_q_fill; ++k) q_tokens.push_back(ts.sample_filler(rng));
        std::string q_text = "Is it";
        for (std::size_t k = 2; k < q_tokens.size(); ++k) q_text += " " + q_tokens[k];
        q_text += "?";
        q.text = q_text;
        corpus.questions.push_back(std::move(q));

        // sentences grouped into reviews of three
        const std::size_t n_sent = spec.sentences_per_question;
        std::size_t sent_in_review = 0;
        std::size_t review_no = 0;
        std::vector<std::string> review_sentences;
        int review_stance = 0;
        auto flush_review = [&]() {
            if (review_sentences.empty()) return;
            SynthReview rv;
            rv.review_id = product_id + "r" + std::to_string(review_no);
            rv.product_id = product_id;
            rv.reviewer_id = padded("u", rng.uniform_int(spec.n_reviewers), 4);
            std::string text;
            for (std::size_t k = 0; k < review_sentences.size(); ++k) {
                if (k > 0) text.push_back(' ');
                text += review_sentences[k];
            }
            rv.text = std::move(text);
            int rating = review_stance > 0 ? 5 : (review_stance < 0 ? 1 : 3);
            rating += static_cast<int>(rng.uniform_int(2)); // mild noise
            rv.rating = std::clamp(rating, 1, 5);
            rv.helpful_total = static_cast<int>(rng.uniform_int(20));
            rv.helpful_yes =
                rv.helpful_total > 0
                    ? static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(rv.helpful_total) + 1))
                    : 0;

            double h1 = 0.0, h2 = 0.0;
            if (rv.helpful_total > 0) {
                h1 = static_cast<double>(rv.helpful_yes) / rv.helpful_total;
                h2 = static_cast<double>(rv.helpful_total - rv.helpful_yes) / rv.helpful_total;
            }
            for (std::size_t k = 0; k < review_sentences.size(); ++k) {
                ExpertSentence s;
                s.sentence_id = rv.review_id + "#" + std::to_string(k);
                s.review_id = rv.review_id;
                s.product_id = product_id;
                s.reviewer_id = rv.reviewer_id;
                s.text = review_sentences[k];
                s.rating = rv.rating;
                s.h1 = h1;
                s.h2 = h2;
                corpus.sentences.push_back(std::move(s));
            }
            result.reviews.push_back(std::move(rv));
            review_sentences.clear();
            review_stance = 0;
            ++review_no;
        };

        for (std::size_t si = 0; si < n_sent; ++si) {
            std::vector<std::string> tokens;
            const bool relevant = rng.uniform() < spec.relevant_fraction;
            const bool positive = rng.uniform() < plans[qi].stance_pos;
            if (relevant) {
                tokens.push_back(aspect);
                for (int k = 0; k < 2; ++k) {
                    const auto& pool = positive ? ts.pos : ts.neg;
                    tokens.push_back(pool[rng.uniform_int(pool.size())]);
                }
                const std::size_t n_fill = 4 + rng.uniform_int(5);
                for (std::size_t k = 0; k < n_fill; ++k) tokens.push_back(ts.sample_filler(rng));
                review_stance += positive ? 1 : -1;
            } else {
                const std::size_t n_fill = 6 + rng.uniform_int(6);
                for (std::size_t k = 0; k < n_fill; ++k) tokens.push_back(ts.sample_filler(rng));
                if (rng.uniform() < 0.5) {
                    const bool pol = rng.uniform() < 0.5;
                    const auto& pool = pol ? ts.pos : ts.neg;
                    tokens.push_back(pool[rng.uniform_int(pool.size())]);
                }
            }
            review_sentences.push_back(render_sentence(tokens));
            if (++sent_in_review == 3) {
                flush_review();
                sent_in_review = 0;
            }
        }
        flush_review();
    }

    finalize_corpus(corpus, spec.vocab_size);

    // planted model over the built vocabulary
    result.planted = ModelParams::zeros(Variant::MoE, corpus.vocab.size());
    result.planted.kappa = {spec.kappa_bm25, spec.kappa_rouge};
    for (const auto& tok : ts.pos) {
        if (auto idx = corpus.vocab.lookup(tok)) result.planted.xi[*idx] = spec.xi_sentiment;
    }
    for (const auto& tok : ts.neg) {
        if (auto idx = corpus.vocab.lookup(tok)) result.planted.xi[*idx] = -spec.xi_sentiment;
    }

    // pass 2: hidden answers, noisy labels, answer text
    for (std::size_t qi = 0; qi < spec.n_questions; ++qi) {
        Rng rng(derive_seed(spec.rng_seed ^ 0x5eedf00dULL, qi));
        QuestionRecord& q = corpus.questions[qi];

        std::vector<const ExpertSentence*> sentences;
        for (std::uint32_t si : corpus.sentences_for(q)) {
            sentences.push_back(&corpus.sentences[si]);
        }
        const double p_true =
            predict_binary(q, sentences, corpus.stats, result.planted).combined;
        const int y = rng.uniform() < p_true ? 1 : 0;

        const int k = sample_label_count(spec.labels_per_question, rng);
        q.answers.clear();
        q.n_pos = 0;
        q.n_neg = 0;
        for (int j = 0; j < k; ++j) {
            int label;
            if (y == 1) {
                label = rng.uniform() < spec.planted_alpha ? 1 : 0;
            } else {
                label = rng.uniform() < spec.planted_beta ? 0 : 1;
            }
            AnswerRecord a;
            a.answer_id = q.question_id + "a" + std::to_string(j);
            std::string text = label == 1 ? "Yes" : "No";
            const std::size_t n_fill = 1 + rng.uniform_int(2);
            for (std::size_t m = 0; m < n_fill; ++m) text += " " + ts.sample_filler(rng);
            text += ".";
            a.text = std::move(text);
            a.tokens = tokenize(a.text);
            a.features = featurize(a.tokens, corpus.vocab);
            a.top_voted = j == 0;
            a.label = label;
            a.label_confidence = 1.0;
            (label == 1 ? q.n_pos : q.n_neg) += 1;
            q.answers.push_back(std::move(a));
        }
        q.n_total = q.n_pos + q.n_neg;
        q.ambiguous = q.n_pos > 0 && q.n_neg > 0;

        result.truth.push_back(GroundTruth{q.question_id, y, p_true});
    }

    return result;
}

void write_synth_jsonl(const SynthResult& result, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    using nlohmann::json;

    auto open_out = [&](const char* name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw DataError(std::string("cannot write ") + name + " under " + dir);
        return out;
    };

    {
        auto out = open_out("products.jsonl");
        for (const auto& p : result.corpus.products) {
            out << json{{"product_id", p.product_id}, {"category", p.category}}.dump() << "\n";
        }
    }
    {
        auto out = open_out("reviews.jsonl");
        for (const auto& r : result.reviews) {
            out << json{{"review_id", r.review_id},
                        {"product_id", r.product_id},
                        {"reviewer_id", r.reviewer_id},
                        {"text", r.text},
                        {"rating", r.rating},
                        {"helpful_yes", r.helpful_yes},
                        {"helpful_total", r.helpful_total}}
                       .dump()
                << "\n";
        }
    }
    {
        auto out = open_out("questions.jsonl");
        for (const auto& q : result.corpus.questions) {
            out << json{{"question_id", q.question_id},
                        {"product_id", q.product_id},
                        {"text", q.text}}
                       .dump()
                << "\n";
        }
    }
    {
        auto out = open_out("answers.jsonl");
        for (const auto& q : result.corpus.questions) {
            for (const auto& a : q.answers) {
                out << json{{"answer_id", a.answer_id},
                            {"question_id", q.question_id},
                            {"text", a.text},
                            {"top_voted", a.top_voted}}
                           .dump()
                    << "\n";
            }
        }
    }
    {
        auto out = open_out("ground_truth.jsonl");
        for (const auto& g : result.truth) {
            out << json{{"question_id", g.question_id},
                        {"y_true", g.y_true},
                        {"p_true", g.p_true}}
                       .dump()
                << "\n";
        }
    }
}

} // namespace oqa
