#include "oqa/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "oqa/lbfgs.hpp"

namespace oqa {

namespace {

const std::set<std::string>& leading_fillers() {
    static const std::set<std::string> fillers = {"so", "ok", "hi", "please"};
    return fillers;
}

const std::set<std::string>& auxiliary_verbs() {
    static const std::set<std::string> aux = {
        "is",  "are",   "was",  "were", "am",  "do",  "does", "did",    "can", "could",
        "will", "would", "should", "has", "have", "had", "may", "might", "must"};
    return aux;
}

bool question_shaped(const std::string& text) {
    std::size_t end = text.size();
    while (end > 0) {
        const unsigned char c = static_cast<unsigned char>(text[end - 1]);
        if (std::isspace(c) || c == '"' || c == '\'' || c == ')' || c == ']') --end;
        else break;
    }
    if (end == 0) return false;
    if (text[end - 1] == '?') return true;
    // unpunctuated questions are common; declarative terminators are not
    return text.find_first_of(".!?") == std::string::npos;
}

} // namespace

bool is_binary_question(const std::string& text) {
    if (!question_shaped(text)) return false;
    const std::vector<std::string> tokens = tokenize(text);
    for (const auto& tok : tokens) {
        if (leading_fillers().count(tok) > 0) continue;
        return auxiliary_verbs().count(tok) > 0;
    }
    return false;
}

std::vector<SeedAnswer> load_seed_answers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<SeedAnswer> seeds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        if (!obj.contains("answer_text") || !obj["answer_text"].is_string() ||
            !obj.contains("label") || !obj["label"].is_number_integer()) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected {\"answer_text\": str, \"label\": 0|1}");
        }
        const int label = obj["label"].get<int>();
        if (label != 0 && label != 1) {
            throw DataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        }
        seeds.push_back(SeedAnswer{obj["answer_text"].get<std::string>(), label});
    }
    return seeds;
}

double LabelerModel::raw_score(const std::vector<std::string>& tokens,
                               const FeatureVector& features) const {
    double s = dot(std::span<const double>(weights.data(), vocab_size), features);
    if (!tokens.empty()) {
        if (tokens.front() == "yes") s += weights[vocab_size];
        if (tokens.front() == "no") s += weights[vocab_size + 1];
    }
    s += weights[vocab_size + 2];
    return s;
}

double LabelerModel::probability(const std::vector<std::string>& tokens,
                                 const FeatureVector& features) const {
    return sigmoid(raw_score(tokens, features));
}

LabelerModel train_answer_labeler(const std::vector<SeedAnswer>& seeds, const Vocabulary& vocab,
                                  const LabelerConfig& config) {
    bool has_pos = false, has_neg = false;
    for (const auto& s : seeds) {
        (s.label == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
        throw DataError("train_answer_labeler: seed set must contain both classes");
    }

    struct Example {
        FeatureVector features;
        bool first_yes = false, first_no = false;
        int label = 0;
    };
    std::vector<Example> examples;
    examples.reserve(seeds.size());
    for (const auto& s : seeds) {
        Example ex;
        const auto tokens = tokenize(s.text);
        ex.features = featurize(tokens, vocab);
        if (!tokens.empty()) {
            ex.first_yes = tokens.front() == "yes";
            ex.first_no = tokens.front() == "no";
        }
        ex.label = s.label;
        examples.push_back(std::move(ex));
    }

    const std::size_t V = vocab.size();
    const std::size_t dim = V + 3;
    auto objective = [&](std::span<const double> w, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loglik = 0.0;
        for (const auto& ex : examples) {
            double s = dot(w.first(V), ex.features) + w[V + 2];
            if (ex.first_yes) s += w[V];
            if (ex.first_no) s += w[V + 1];
            loglik += ex.label == 1 ? log_sigmoid(s) : log_sigmoid(-s);
            const double resid = sigmoid(s) - ex.label;
            add_scaled(grad.first(V), ex.features, resid);
            if (ex.first_yes) grad[V] += resid;
            if (ex.first_no) grad[V + 1] += resid;
            grad[V + 2] += resid;
        }
        double penalty = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            penalty += w[i] * w[i];
            grad[i] += 2.0 * config.lambda * w[i];
        }
        return -loglik + config.lambda * penalty;
    };

    LbfgsOptions opts;
    opts.max_iters = config.lbfgs_max_iters;
    opts.grad_tol = config.lbfgs_grad_tol;
    const LbfgsResult res = lbfgs_minimize(objective, std::vector<double>(dim, 0.0), opts);

    LabelerModel model;
    model.vocab_size = V;
    model.weights = res.x;
    return model;
}

std::size_t detect_binary_questions(Corpus& corpus) {
    std::size_t n = 0;
    for (auto& q : corpus.questions) {
        const bool binary = is_binary_question(q.text);
        q.qtype = binary ? QuestionType::Binary : QuestionType::Open;
        if (binary) ++n;
    }
    return n;
}

std::vector<LabeledAnswer> label_answers(const Corpus& corpus, const LabelerModel& labeler,
                                         double keep_fraction) {
    if (keep_fraction <= 0.0 || keep_fraction > 1.0) {
        throw DataError("label_answers: keep_fraction must lie in (0, 1]");
    }
    std::vector<LabeledAnswer> scored;
    for (const auto& q : corpus.questions) {
        if (q.qtype != QuestionType::Binary) continue;
        for (const auto& a : q.answers) {
            const double prob = labeler.probability(a.tokens, a.features);
            LabeledAnswer la;
            la.answer_id = a.answer_id;
            la.label = prob >= 0.5 ? 1 : 0;
            la.confidence = 0.5 + std::fabs(prob - 0.5);
            scored.push_back(std::move(la));
        }
    }
    if (scored.empty()) return scored;

    std::sort(scored.begin(), scored.end(), [](const LabeledAnswer& x, const LabeledAnswer& y) {
        if (x.confidence != y.confidence) return x.confidence > y.confidence;
        return x.answer_id < y.answer_id;
    });
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(scored.size())));
    scored.resize(std::min(keep, scored.size()));
    return scored;
}

void aggregate_labels(QuestionRecord& question, const std::vector<LabeledAnswer>& kept) {
    std::unordered_map<std::string, const LabeledAnswer*> by_id;
    by_id.reserve(kept.size());
    for (const auto& la : kept) by_id.emplace(la.answer_id, &la);

    question.n_pos = 0;
    question.n_neg = 0;
    for (auto& a : question.answers) {
        auto it = by_id.find(a.answer_id);
        if (it == by_id.end()) {
            a.label = -1;
            a.label_confidence = 0.0;
            continue;
        }
        a.label = it->second->label;
        a.label_confidence = it->second->confidence;
        (a.label == 1 ? question.n_pos : question.n_neg) += 1;
    }
    question.n_total = question.n_pos + question.n_neg;
    question.ambiguous = question.n_pos > 0 && question.n_neg > 0;
}

void apply_labels(Corpus& corpus, const std::vector<LabeledAnswer>& kept) {
    for (auto& q : corpus.questions) {
        if (q.qtype != QuestionType::Binary) continue;
        aggregate_labels(q, kept);
    }
}

} // namespace oqa
