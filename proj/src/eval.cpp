#include "oqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "oqa/train.hpp"

namespace oqa {

BinaryTestSet build_silver(std::span<const QuestionRecord> questions) {
    BinaryTestSet ts;
    ts.standard = Standard::Silver;
    for (const auto& q : questions) {
        if (q.n_total == 0) continue;
        if (q.n_pos == q.n_neg) continue; // ties are discarded
        ts.items.emplace_back(q.question_id, q.n_pos > q.n_neg ? 1 : 0);
    }
    return ts;
}

BinaryTestSet build_gold(std::span<const QuestionRecord> questions) {
    BinaryTestSet ts;
    ts.standard = Standard::Gold;
    for (const auto& q : questions) {
        if (q.n_total == 0) continue;
        if (q.n_pos > 0 && q.n_neg > 0) continue; // conflicting labels ignored
        ts.items.emplace_back(q.question_id, q.n_pos > 0 ? 1 : 0);
    }
    return ts;
}

double auc_binary(const std::vector<std::pair<double, int>>& scored) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& [score, label] : scored) {
        if (label == 1) ++n_pos;
        else ++n_neg;
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("auc_binary: test set must contain both classes");
    }

    std::vector<std::pair<double, int>> sorted = scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // rank-sum with average ranks over tied scores (ties count half)
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (sorted[k].second == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double auc_binary(const std::unordered_map<std::string, double>& predictions,
                  const BinaryTestSet& testset) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(testset.items.size());
    for (const auto& [qid, label] : testset.items) {
        auto it = predictions.find(qid);
        if (it == predictions.end()) {
            throw DataError("auc_binary: no prediction for question '" + qid + "'");
        }
        scored.emplace_back(it->second, label);
    }
    return auc_binary(scored);
}

double accuracy_at(const std::vector<std::tuple<std::string, double, int>>& predictions,
                   double a) {
    if (a < 0.0 || a >= 1.0) throw DataError("accuracy_at: a must lie in [0, 1)");
    if (predictions.empty()) throw DataError("accuracy_at: empty prediction set");

    std::vector<std::tuple<std::string, double, int>> sorted = predictions;
    std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
        const double cx = std::fabs(std::get<1>(x) - 0.5);
        const double cy = std::fabs(std::get<1>(y) - 0.5);
        if (cx != cy) return cx > cy;
        return std::get<0>(x) < std::get<0>(y);
    });
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil((1.0 - a) * static_cast<double>(sorted.size())));

    std::size_t correct = 0;
    for (std::size_t i = 0; i < keep; ++i) {
        const double p = std::get<1>(sorted[i]);
        const int y = std::get<2>(sorted[i]);
        const int pred = p >= 0.5 ? 1 : 0; // 0.5 counts as a positive prediction
        if (pred == y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(keep);
}

double accuracy_at(const std::unordered_map<std::string, double>& predictions,
                   const BinaryTestSet& testset, double a) {
    std::vector<std::tuple<std::string, double, int>> items;
    items.reserve(testset.items.size());
    for (const auto& [qid, label] : testset.items) {
        auto it = predictions.find(qid);
        if (it == predictions.end()) {
            throw DataError("accuracy_at: no prediction for question '" + qid + "'");
        }
        items.emplace_back(qid, it->second, label);
    }
    return accuracy_at(items, a);
}

OpenEvalSet sample_non_answers(const Corpus& corpus,
                               std::span<const std::uint32_t> question_indices,
                               int neg_per_answer, std::uint64_t seed) {
    if (neg_per_answer < 1) throw DataError("sample_non_answers: neg_per_answer must be >= 1");

    // pool of (question_index, answer_index) over the given questions
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pool;
    for (std::uint32_t qi : question_indices) {
        const auto& q = corpus.questions.at(qi);
        for (std::uint32_t ai = 0; ai < q.answers.size(); ++ai) pool.emplace_back(qi, ai);
    }

    OpenEvalSet out;
    out.neg_per_answer = neg_per_answer;
    out.rng_seed = seed;
    Rng rng(seed);
    for (std::uint32_t qi : question_indices) {
        const auto& q = corpus.questions.at(qi);
        OpenEvalSet::Entry entry;
        entry.question_index = qi;
        entry.negs.resize(q.answers.size());
        if (!q.answers.empty()) {
            if (pool.size() <= q.answers.size()) {
                throw DataError("sample_non_answers: answer pool too small for question '" +
                                q.question_id + "'");
            }
            for (std::uint32_t ai = 0; ai < q.answers.size(); ++ai) {
                auto& negs = entry.negs[ai];
                negs.reserve(neg_per_answer);
                for (int k = 0; k < neg_per_answer; ++k) {
                    std::pair<std::uint32_t, std::uint32_t> pick;
                    do {
                        pick = pool[rng.uniform_int(pool.size())];
                    } while (pick.first == qi);
                    negs.push_back(pick);
                }
            }
        }
        out.entries.push_back(std::move(entry));
    }
    return out;
}

double auc_open(const std::vector<std::vector<std::vector<double>>>& pair_probs) {
    double q_sum = 0.0;
    std::size_t q_count = 0;
    for (const auto& per_answer : pair_probs) {
        if (per_answer.empty()) continue;
        double a_sum = 0.0;
        std::size_t a_count = 0;
        for (const auto& probs : per_answer) {
            if (probs.empty()) continue;
            double hits = 0.0;
            for (double p : probs) {
                if (p > 0.5) hits += 1.0; // strict: exact 0.5 scores no credit
            }
            a_sum += hits / static_cast<double>(probs.size());
            ++a_count;
        }
        if (a_count == 0) continue;
        q_sum += a_sum / static_cast<double>(a_count);
        ++q_count;
    }
    if (q_count == 0) throw DataError("auc_open: no scorable questions");
    return q_sum / static_cast<double>(q_count);
}

double auc_open(const Corpus& corpus, const ModelParams& params, const OpenEvalSet& eval_set) {
    const bool subjective = is_subjective_variant(params.variant);
    std::vector<std::vector<std::vector<double>>> probs;
    for (const auto& entry : eval_set.entries) {
        const auto& q = corpus.questions.at(entry.question_index);
        const auto& sent_ids = corpus.sentences_for(q);
        if (sent_ids.empty() || entry.negs.empty()) continue;

        std::vector<const ExpertSentence*> sentences;
        sentences.reserve(sent_ids.size());
        for (std::uint32_t si : sent_ids) sentences.push_back(&corpus.sentences[si]);
        const std::vector<double> weights = relevance_weights(q, sentences, corpus.stats, params);

        std::vector<std::vector<double>> per_answer;
        for (std::uint32_t ai = 0; ai < entry.negs.size(); ++ai) {
            std::vector<double> probs_a;
            probs_a.reserve(entry.negs[ai].size());
            for (const auto& [nq, na] : entry.negs[ai]) {
                const auto& non_answer = corpus.questions[nq].answers[na];
                double p = 0.0;
                for (std::size_t i = 0; i < sentences.size(); ++i) {
                    const double w = answer_pair_score(q.answers[ai], non_answer, *sentences[i],
                                                       params, subjective);
                    p += weights[i] * sigmoid(w);
                }
                probs_a.push_back(p);
            }
            per_answer.push_back(std::move(probs_a));
        }
        probs.push_back(std::move(per_answer));
    }
    return auc_open(probs);
}

bool in_train_split(const std::string& question_id) {
    return fnv1a(question_id) % 3 != 2; // two thirds train, one third test
}

} // namespace oqa
