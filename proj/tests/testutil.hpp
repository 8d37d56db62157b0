#ifndef OQA_TESTUTIL_HPP
#define OQA_TESTUTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oqa/corpus.hpp"
#include "oqa/train.hpp"

namespace oqa::testutil {

// Random labeled corpus for gradient and EM checks: a handful of products,
// short sentences over a small token pool, 1..4 labeled answers per question.
inline Corpus random_corpus(std::uint64_t seed, std::size_t n_questions = 20,
                            std::size_t n_products = 5,
                            std::size_t sentences_per_product = 5) {
    Rng rng(seed);
    Corpus corpus;

    std::vector<std::string> pool;
    for (int i = 0; i < 20; ++i) pool.push_back("tok" + std::to_string(i));
    const std::vector<std::string> reviewers = {"ua", "ub", "uc", "ud", "ue", "uf"};

    auto draw_tokens = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::string> out;
        const std::size_t n = lo + rng.uniform_int(hi - lo + 1);
        for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.uniform_int(pool.size())]);
        return out;
    };
    auto join = [](const std::vector<std::string>& ts) {
        std::string s;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            if (i) s.push_back(' ');
            s += ts[i];
        }
        return s;
    };

    for (std::size_t pi = 0; pi < n_products; ++pi) {
        const std::string pid = "prod" + std::to_string(pi);
        corpus.products.push_back(Product{pid, "cat" + std::to_string(pi % 2)});
        for (std::size_t si = 0; si < sentences_per_product; ++si) {
            ExpertSentence s;
            s.sentence_id = pid + "rev" + std::to_string(si / 3) + "#" + std::to_string(si % 3);
            s.review_id = pid + "rev" + std::to_string(si / 3);
            s.product_id = pid;
            s.reviewer_id = reviewers[rng.uniform_int(reviewers.size())];
            s.text = join(draw_tokens(3, 8));
            s.rating = 1 + static_cast<int>(rng.uniform_int(5));
            const double tot = static_cast<double>(rng.uniform_int(10));
            if (tot > 0) {
                const double yes = static_cast<double>(rng.uniform_int(
                    static_cast<std::uint64_t>(tot) + 1));
                s.h1 = yes / tot;
                s.h2 = (tot - yes) / tot;
            }
            corpus.sentences.push_back(std::move(s));
        }
    }

    for (std::size_t qi = 0; qi < n_questions; ++qi) {
        QuestionRecord q;
        q.question_id = "q" + std::to_string(qi);
        q.product_id = "prod" + std::to_string(rng.uniform_int(n_products));
        q.text = join(draw_tokens(2, 5)) + "?";
        const std::size_t n_answers = 1 + rng.uniform_int(4);
        for (std::size_t ai = 0; ai < n_answers; ++ai) {
            AnswerRecord a;
            a.answer_id = q.question_id + "a" + std::to_string(ai);
            a.text = join(draw_tokens(1, 4));
            a.top_voted = ai == 0;
            q.answers.push_back(std::move(a));
        }
        corpus.questions.push_back(std::move(q));
    }

    finalize_corpus(corpus, 5000);

    // labels attached after featurization (they do not affect features)
    for (auto& q : corpus.questions) {
        q.qtype = QuestionType::Binary;
        q.n_pos = q.n_neg = 0;
        for (auto& a : q.answers) {
            a.label = rng.uniform() < 0.6 ? 1 : 0;
            a.label_confidence = 1.0;
            (a.label == 1 ? q.n_pos : q.n_neg) += 1;
        }
        q.n_total = q.n_pos + q.n_neg;
        q.ambiguous = q.n_pos > 0 && q.n_neg > 0;
    }
    return corpus;
}

inline std::vector<double> random_point(std::size_t dim, std::uint64_t seed,
                                        double scale = 0.5) {
    Rng rng(seed);
    std::vector<double> x(dim);
    for (auto& v : x) v = scale * (2.0 * rng.uniform() - 1.0);
    return x;
}

// Central finite differences against the analytic gradient. Relative error per
// coordinate uses a unit floor: |ga - gfd| / max(1, |ga|, |gfd|).
inline double max_grad_rel_err(
    const std::function<double(std::span<const double>, std::span<double>)>& f,
    std::vector<double> theta, double h = 1e-5) {
    const std::size_t dim = theta.size();
    std::vector<double> analytic(dim), scratch(dim);
    f(theta, analytic);

    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp = f(theta, scratch);
        theta[i] = orig - h;
        const double fm = f(theta, scratch);
        theta[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double err =
            std::fabs(analytic[i] - fd) /
            std::max({1.0, std::fabs(analytic[i]), std::fabs(fd)});
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace oqa::testutil

#endif // OQA_TESTUTIL_HPP
