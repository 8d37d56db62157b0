#include "oqa/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "oqa/eval.hpp"

namespace oqa {

ParamLayout ParamLayout::make(Variant v, std::size_t vocab, std::size_t n_users) {
    ParamLayout L;
    L.variant = v;
    L.vocab = vocab;
    L.n_users = n_users;

    std::size_t off = 0;
    L.kappa = off;
    off += 2;
    L.eta = off;
    off += vocab;
    L.mu = off;
    off += vocab;
    if (!is_open_variant(v)) {
        L.xi = off;
        off += vocab;
    }
    if (is_em_variant(v)) {
        L.gamma1 = off;
        off += vocab + 1;
        L.gamma2 = off;
        off += vocab + 1;
    }
    if (is_subjective_variant(v)) {
        L.g = off;
        off += 2;
        L.c = off;
        off += 1;
        L.e = off;
        off += n_users;
        L.b = off;
        off += n_users;
    }
    L.total = off;
    return L;
}

std::vector<double> ParamLayout::pack(const ModelParams& p,
                                      const std::vector<std::string>& users) const {
    std::vector<double> theta(total, 0.0);
    theta[kappa] = p.kappa[0];
    theta[kappa + 1] = p.kappa[1];
    auto copy_block = [&](std::size_t off, const std::vector<double>& src, std::size_t len) {
        if (!has(off)) return;
        for (std::size_t i = 0; i < len && i < src.size(); ++i) theta[off + i] = src[i];
    };
    copy_block(eta, p.eta, vocab);
    copy_block(mu, p.mu, vocab);
    copy_block(xi, p.xi, vocab);
    copy_block(gamma1, p.gamma1, vocab + 1);
    copy_block(gamma2, p.gamma2, vocab + 1);
    if (has(g)) {
        theta[g] = p.g[0];
        theta[g + 1] = p.g[1];
        theta[c] = p.c;
        for (std::size_t u = 0; u < users.size(); ++u) {
            auto it = p.expertise.find(users[u]);
            theta[e + u] = it == p.expertise.end() ? 0.0 : it->second;
            auto it2 = p.bias.find(users[u]);
            theta[b + u] = it2 == p.bias.end() ? 0.0 : it2->second;
        }
    }
    return theta;
}

ModelParams ParamLayout::unpack(std::span<const double> theta,
                                const std::vector<std::string>& users, double lambda) const {
    ModelParams p = ModelParams::zeros(variant, vocab, lambda);
    p.kappa[0] = theta[kappa];
    p.kappa[1] = theta[kappa + 1];
    auto read_block = [&](std::size_t off, std::vector<double>& dst, std::size_t len) {
        if (!has(off)) return;
        dst.assign(theta.begin() + off, theta.begin() + off + len);
    };
    read_block(eta, p.eta, vocab);
    read_block(mu, p.mu, vocab);
    read_block(xi, p.xi, vocab);
    read_block(gamma1, p.gamma1, vocab + 1);
    read_block(gamma2, p.gamma2, vocab + 1);
    if (has(g)) {
        p.g[0] = theta[g];
        p.g[1] = theta[g + 1];
        p.c = theta[c];
        for (std::size_t u = 0; u < users.size(); ++u) {
            if (theta[e + u] != 0.0) p.expertise[users[u]] = theta[e + u];
            if (theta[b + u] != 0.0) p.bias[users[u]] = theta[b + u];
        }
    }
    return p;
}

std::vector<double> ParamLayout::initial_point() const {
    std::vector<double> theta(total, 0.0);
    if (has(gamma1)) {
        const double bias0 = std::log(4.0); // sigmoid^-1(0.8)
        theta[gamma1 + vocab] = bias0;
        theta[gamma2 + vocab] = bias0;
    }
    return theta;
}

namespace {

FeatureVector sparse_diff(const FeatureVector& a, const FeatureVector& b) {
    FeatureVector out;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() || j < b.indices.size()) {
        if (j >= b.indices.size() || (i < a.indices.size() && a.indices[i] < b.indices[j])) {
            out.indices.push_back(a.indices[i]);
            out.weights.push_back(a.weights[i]);
            ++i;
        } else if (i >= a.indices.size() || b.indices[j] < a.indices[i]) {
            out.indices.push_back(b.indices[j]);
            out.weights.push_back(-b.weights[j]);
            ++j;
        } else {
            const double d = a.weights[i] - b.weights[j];
            if (d != 0.0) {
                out.indices.push_back(a.indices[i]);
                out.weights.push_back(d);
            }
            ++i;
            ++j;
        }
    }
    return out;
}

} // namespace

TrainData build_train_data(const Corpus& corpus, std::span<const std::uint32_t> question_indices,
                           const TrainDataOptions& options) {
    TrainData data;
    data.vocab = corpus.vocab.size();

    std::set<std::string> user_set;
    for (std::uint32_t qi : question_indices) {
        const auto& q = corpus.questions.at(qi);
        for (std::uint32_t si : corpus.sentences_for(q)) {
            user_set.insert(corpus.sentences[si].reviewer_id);
        }
    }
    data.users.assign(user_set.begin(), user_set.end());
    std::unordered_map<std::string, std::int32_t> user_index;
    for (std::size_t u = 0; u < data.users.size(); ++u) {
        user_index.emplace(data.users[u], static_cast<std::int32_t>(u));
    }

    OpenEvalSet sampled;
    if (options.build_pairs) {
        sampled = sample_non_answers(corpus, question_indices, options.neg_samples_per_answer,
                                     options.seed);
    }

    for (std::size_t pos = 0; pos < question_indices.size(); ++pos) {
        const std::uint32_t qi = question_indices[pos];
        const auto& q = corpus.questions.at(qi);
        const auto& sent_ids = corpus.sentences_for(q);
        if (sent_ids.empty()) {
            ++data.skipped_no_sentences;
            continue;
        }

        QuestionData qd;
        qd.question_index = qi;
        qd.f_q = q.features;
        qd.sentences.reserve(sent_ids.size());
        for (std::uint32_t si : sent_ids) {
            const auto& s = corpus.sentences[si];
            SentenceData sd;
            sd.sentence_index = si;
            sd.sim = similarity_vector(q.tokens, s.tokens, corpus.stats);
            sd.had_qr = hadamard(q.features, s.features);
            sd.f_r = s.features;
            sd.h1 = s.h1;
            sd.h2 = s.h2;
            sd.rt_centered = center_rating(s.rating);
            sd.user = user_index.at(s.reviewer_id);
            qd.sentences.push_back(std::move(sd));
        }

        // label counts from the attached answer labels
        std::vector<int> labels;
        int top_voted_label = -1;
        for (const auto& a : q.answers) {
            if (a.label >= 0) {
                labels.push_back(a.label);
                if (a.top_voted && top_voted_label < 0) top_voted_label = a.label;
            }
        }
        qd.n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
        qd.n_neg = static_cast<int>(labels.size()) - qd.n_pos;
        qd.r_q = labels.empty() ? 0.0
                                : static_cast<double>(qd.n_pos) / static_cast<double>(labels.size());
        switch (options.single_label_policy) {
            case SingleLabelPolicy::TopVoted:
                qd.y_single = top_voted_label >= 0
                                  ? top_voted_label
                                  : (labels.empty() ? -1 : labels.front());
                break;
            case SingleLabelPolicy::First:
                qd.y_single = labels.empty() ? -1 : labels.front();
                break;
            case SingleLabelPolicy::Random: {
                if (labels.empty()) {
                    qd.y_single = -1;
                } else {
                    Rng rng(derive_seed(options.seed, qi));
                    qd.y_single = labels[rng.uniform_int(labels.size())];
                }
                break;
            }
        }

        if (options.build_pairs) {
            const auto& entry = sampled.entries[pos];
            qd.n_answers = static_cast<std::uint32_t>(entry.negs.size());
            for (std::uint32_t ai = 0; ai < q.answers.size(); ++ai) {
                if (q.answers[ai].top_voted) {
                    qd.single_answer = ai;
                    break;
                }
            }
            for (std::uint32_t ai = 0; ai < entry.negs.size(); ++ai) {
                const auto& f_a = q.answers[ai].features;
                for (const auto& [nq, na] : entry.negs[ai]) {
                    PairData pd;
                    pd.answer_ordinal = ai;
                    pd.diff_had.reserve(qd.sentences.size());
                    const FeatureVector diff =
                        sparse_diff(f_a, corpus.questions[nq].answers[na].features);
                    for (const auto& sd : qd.sentences) {
                        pd.diff_had.push_back(hadamard(diff, sd.f_r));
                    }
                    qd.pairs.push_back(std::move(pd));
                }
            }
        }

        data.questions.push_back(std::move(qd));
    }
    return data;
}

namespace {

struct Scratch {
    std::vector<double> v, w_base, amp, pi, sig, dv;
};

// Relevance softmax for one question; fills work.v and work.pi.
void forward_weights(const QuestionData& qd, const ParamLayout& L,
                     std::span<const double> theta, bool subjective, Scratch& work) {
    const std::size_t n = qd.sentences.size();
    work.v.resize(n);
    work.pi.resize(n);
    const std::span<const double> eta = theta.subspan(L.eta, L.vocab);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sd = qd.sentences[i];
        double v = theta[L.kappa] * sd.sim.bm25 + theta[L.kappa + 1] * sd.sim.rouge_l +
                   dot(eta, sd.had_qr);
        if (subjective) {
            v += theta[L.g] * sd.h1 + theta[L.g + 1] * sd.h2 + theta[L.e + sd.user];
        }
        work.v[i] = v;
    }
    const double m = *std::max_element(work.v.begin(), work.v.end());
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        work.pi[i] = std::exp(work.v[i] - m);
        z += work.pi[i];
    }
    for (auto& x : work.pi) x /= z;
}

// p_q for one question under flat parameters. Fills pi/sig/w_base/amp.
double forward_binary(const QuestionData& qd, const ParamLayout& L,
                      std::span<const double> theta, bool subjective, Scratch& work) {
    forward_weights(qd, L, theta, subjective, work);
    const std::size_t n = qd.sentences.size();
    work.w_base.resize(n);
    work.amp.resize(n);
    work.sig.resize(n);
    const std::span<const double> mu = theta.subspan(L.mu, L.vocab);
    const std::span<const double> xi = theta.subspan(L.xi, L.vocab);
    double p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sd = qd.sentences[i];
        work.w_base[i] = dot(mu, sd.had_qr) + dot(xi, sd.f_r);
        work.amp[i] = subjective
                          ? 1.0 + theta[L.c] * sd.rt_centered + theta[L.b + sd.user]
                          : 1.0;
        work.sig[i] = sigmoid(work.w_base[i] * work.amp[i]);
        p += work.pi[i] * work.sig[i];
    }
    return p;
}

// Backpropagates dL/dv into the relevance parameters.
void backward_weights(const QuestionData& qd, const ParamLayout& L, bool subjective,
                      const Scratch& work, std::span<double> grad) {
    for (std::size_t i = 0; i < qd.sentences.size(); ++i) {
        const double dv = work.dv[i];
        if (dv == 0.0) continue;
        const auto& sd = qd.sentences[i];
        grad[L.kappa] += dv * sd.sim.bm25;
        grad[L.kappa + 1] += dv * sd.sim.rouge_l;
        add_scaled(grad.subspan(L.eta, L.vocab), sd.had_qr, dv);
        if (subjective) {
            grad[L.g] += dv * sd.h1;
            grad[L.g + 1] += dv * sd.h2;
            grad[L.e + sd.user] += dv;
        }
    }
}

// gamma head: z = <gamma, [f_q; 1]>
double gamma_logit(const FeatureVector& f_q, std::span<const double> gamma, std::size_t vocab) {
    return dot(gamma.first(vocab), f_q) + gamma[vocab];
}

// Log-likelihood contribution (maximization sense) for one binary question;
// gradient accumulated into grad (also maximization sense).
double binary_question_term(const QuestionData& qd, const ParamLayout& L,
                            std::span<const double> theta, std::span<double> grad,
                            BinaryMode mode, double posterior, bool subjective, Scratch& work) {
    double target = 0.0; // t_q in the EM mode, y_q / r_q otherwise
    double log_a = 0.0, log_b = 0.0, z1 = 0.0, z2 = 0.0;
    switch (mode) {
        case BinaryMode::Single:
            if (qd.y_single < 0) return 0.0;
            target = qd.y_single;
            break;
        case BinaryMode::Kl:
            if (qd.n_pos + qd.n_neg == 0) return 0.0;
            target = qd.r_q;
            break;
        case BinaryMode::EmComplete:
            if (qd.n_pos + qd.n_neg == 0) return 0.0;
            target = posterior;
            z1 = gamma_logit(qd.f_q, theta.subspan(L.gamma1, L.vocab + 1), L.vocab);
            z2 = gamma_logit(qd.f_q, theta.subspan(L.gamma2, L.vocab + 1), L.vocab);
            label_joint_log(z1, z2, qd.n_pos, qd.n_neg, log_a, log_b);
            break;
    }

    const double p = forward_binary(qd, L, theta, subjective, work);
    const double pc = clip_prob(p);

    double value = target * std::log(pc) + (1.0 - target) * std::log1p(-pc);
    const double A = target / pc - (1.0 - target) / (1.0 - pc);

    if (mode == BinaryMode::EmComplete) {
        value += target * log_a + (1.0 - target) * log_b;
        const double alpha = sigmoid(z1);
        const double beta = sigmoid(z2);
        const double dz1 = target * (qd.n_pos * (1.0 - alpha) - qd.n_neg * alpha);
        const double dz2 = (1.0 - target) * (qd.n_neg * (1.0 - beta) - qd.n_pos * beta);
        auto g1 = grad.subspan(L.gamma1, L.vocab + 1);
        auto g2 = grad.subspan(L.gamma2, L.vocab + 1);
        add_scaled(g1.first(L.vocab), qd.f_q, dz1);
        g1[L.vocab] += dz1;
        add_scaled(g2.first(L.vocab), qd.f_q, dz2);
        g2[L.vocab] += dz2;
    }

    // mixture backward
    const std::size_t n = qd.sentences.size();
    work.dv.resize(n);
    auto mu_grad = grad.subspan(L.mu, L.vocab);
    auto xi_grad = grad.subspan(L.xi, L.vocab);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sd = qd.sentences[i];
        work.dv[i] = A * work.pi[i] * (work.sig[i] - p);
        const double dw = A * work.pi[i] * work.sig[i] * (1.0 - work.sig[i]);
        add_scaled(mu_grad, sd.had_qr, dw * work.amp[i]);
        add_scaled(xi_grad, sd.f_r, dw * work.amp[i]);
        if (subjective) {
            grad[L.c] += dw * work.w_base[i] * sd.rt_centered;
            grad[L.b + sd.user] += dw * work.w_base[i];
        }
    }
    backward_weights(qd, L, subjective, work, grad);
    return value;
}

// One open-ended question: sum over its preference pairs of log p_{q,a>abar}.
double open_question_term(const QuestionData& qd, const ParamLayout& L,
                          std::span<const double> theta, std::span<double> grad, bool multi,
                          bool subjective, Scratch& work) {
    if (qd.pairs.empty() || qd.n_answers == 0) return 0.0;

    forward_weights(qd, L, theta, subjective, work);
    const std::size_t n = qd.sentences.size();
    work.dv.assign(n, 0.0);
    work.sig.resize(n);
    work.w_base.resize(n);
    work.amp.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& sd = qd.sentences[i];
        work.amp[i] = subjective
                          ? 1.0 + theta[L.c] * sd.rt_centered + theta[L.b + sd.user]
                          : 1.0;
    }

    const std::span<const double> mu = theta.subspan(L.mu, L.vocab);
    auto mu_grad = grad.subspan(L.mu, L.vocab);
    const double scale = multi ? 1.0 / static_cast<double>(qd.n_answers) : 1.0;

    double value = 0.0;
    for (const auto& pair : qd.pairs) {
        if (!multi && pair.answer_ordinal != qd.single_answer) continue;
        double p = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            work.w_base[i] = dot(mu, pair.diff_had[i]);
            work.sig[i] = sigmoid(work.w_base[i] * work.amp[i]);
            p += work.pi[i] * work.sig[i];
        }
        const double pc = clip_prob(p);
        value += scale * std::log(pc);
        const double dlogp = scale / pc;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& sd = qd.sentences[i];
            work.dv[i] += dlogp * work.pi[i] * (work.sig[i] - p);
            const double dw = dlogp * work.pi[i] * work.sig[i] * (1.0 - work.sig[i]);
            add_scaled(mu_grad, pair.diff_had[i], dw * work.amp[i]);
            if (subjective) {
                grad[L.c] += dw * work.w_base[i] * sd.rt_centered;
                grad[L.b + sd.user] += dw * work.w_base[i];
            }
        }
    }
    backward_weights(qd, L, subjective, work, grad);
    return value;
}

} // namespace

TrainObjective TrainObjective::binary(const TrainData& data, const ParamLayout& layout,
                                      BinaryMode mode, bool subjective, double lambda,
                                      int threads) {
    TrainObjective obj;
    obj.data_ = &data;
    obj.layout_ = &layout;
    obj.open_ = false;
    obj.mode_ = mode;
    obj.subjective_ = subjective;
    obj.lambda_ = lambda;
    obj.threads_ = std::max(1, threads);
    return obj;
}

TrainObjective TrainObjective::open(const TrainData& data, const ParamLayout& layout, bool multi,
                                    bool subjective, double lambda, int threads) {
    TrainObjective obj;
    obj.data_ = &data;
    obj.layout_ = &layout;
    obj.open_ = true;
    obj.multi_ = multi;
    obj.subjective_ = subjective;
    obj.lambda_ = lambda;
    obj.threads_ = std::max(1, threads);
    return obj;
}

void TrainObjective::set_posteriors(std::vector<double> t) { posteriors_ = std::move(t); }

double TrainObjective::operator()(std::span<const double> theta, std::span<double> grad) const {
    const auto& questions = data_->questions;
    const std::size_t dim = layout_->total;
    std::fill(grad.begin(), grad.end(), 0.0);

    auto run_range = [&](std::size_t begin, std::size_t end, std::span<double> gbuf) {
        Scratch work;
        double value = 0.0;
        for (std::size_t qi = begin; qi < end; ++qi) {
            const auto& qd = questions[qi];
            if (open_) {
                value += open_question_term(qd, *layout_, theta, gbuf, multi_, subjective_, work);
            } else {
                const double t =
                    mode_ == BinaryMode::EmComplete && qi < posteriors_.size() ? posteriors_[qi]
                                                                               : 0.0;
                value +=
                    binary_question_term(qd, *layout_, theta, gbuf, mode_, t, subjective_, work);
            }
        }
        return value;
    };

    double loglik = 0.0;
    if (threads_ <= 1 || questions.size() < 2 * static_cast<std::size_t>(threads_)) {
        loglik = run_range(0, questions.size(), grad);
    } else {
        // fixed contiguous chunks merged in order: bitwise deterministic for a
        // given thread count
        const std::size_t T = static_cast<std::size_t>(threads_);
        std::vector<std::vector<double>> bufs(T, std::vector<double>(dim, 0.0));
        std::vector<double> partial(T, 0.0);
        std::vector<std::thread> pool;
        const std::size_t chunk = (questions.size() + T - 1) / T;
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(questions.size(), begin + chunk);
            pool.emplace_back([&, t, begin, end] {
                if (begin < end) partial[t] = run_range(begin, end, bufs[t]);
            });
        }
        for (auto& th : pool) th.join();
        for (std::size_t t = 0; t < T; ++t) {
            loglik += partial[t];
            for (std::size_t i = 0; i < dim; ++i) grad[i] += bufs[t][i];
        }
    }

    // minimization form with the L2 penalty
    double penalty = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        penalty += theta[i] * theta[i];
        grad[i] = -grad[i] + 2.0 * lambda_ * theta[i];
    }
    return -loglik + lambda_ * penalty;
}

void sensitivity_specificity(const FeatureVector& f_q, std::span<const double> gamma1,
                             std::span<const double> gamma2, std::size_t vocab,
                             double& alpha_out, double& beta_out) {
    alpha_out = sigmoid(dot(gamma1.first(vocab), f_q) + gamma1[vocab]);
    beta_out = sigmoid(dot(gamma2.first(vocab), f_q) + gamma2[vocab]);
}

void label_joint_log(double z1, double z2, int n_pos, int n_neg, double& log_a, double& log_b) {
    // log alpha = log sigmoid(z1), log(1-alpha) = log sigmoid(-z1)
    log_a = n_pos * log_sigmoid(z1) + n_neg * log_sigmoid(-z1);
    log_b = n_pos * log_sigmoid(-z2) + n_neg * log_sigmoid(z2);
}

double posterior_t(double log_a, double log_b, double p) {
    const double pc = clip_prob(p);
    const double la = log_a + std::log(pc);
    const double lb = log_b + std::log1p(-pc);
    return sigmoid(la - lb);
}

EMState e_step(const TrainData& data, const ParamLayout& layout, std::span<const double> theta,
               bool subjective) {
    EMState state;
    state.t.resize(data.questions.size(), 0.5);
    state.alpha.resize(data.questions.size(), 0.5);
    state.beta.resize(data.questions.size(), 0.5);
    Scratch work;
    for (std::size_t qi = 0; qi < data.questions.size(); ++qi) {
        const auto& qd = data.questions[qi];
        if (qd.n_pos + qd.n_neg == 0) continue;
        const double z1 =
            dot(theta.subspan(layout.gamma1, layout.vocab), qd.f_q) + theta[layout.gamma1 + layout.vocab];
        const double z2 =
            dot(theta.subspan(layout.gamma2, layout.vocab), qd.f_q) + theta[layout.gamma2 + layout.vocab];
        double log_a, log_b;
        label_joint_log(z1, z2, qd.n_pos, qd.n_neg, log_a, log_b);
        const double p = forward_binary(qd, layout, theta, subjective, work);
        state.alpha[qi] = sigmoid(z1);
        state.beta[qi] = sigmoid(z2);
        state.t[qi] = posterior_t(log_a, log_b, p);
    }
    return state;
}

double observed_loglik(const TrainData& data, const ParamLayout& layout,
                       std::span<const double> theta, bool subjective, double lambda) {
    Scratch work;
    double value = 0.0;
    for (const auto& qd : data.questions) {
        if (qd.n_pos + qd.n_neg == 0) continue;
        const double z1 =
            dot(theta.subspan(layout.gamma1, layout.vocab), qd.f_q) + theta[layout.gamma1 + layout.vocab];
        const double z2 =
            dot(theta.subspan(layout.gamma2, layout.vocab), qd.f_q) + theta[layout.gamma2 + layout.vocab];
        double log_a, log_b;
        label_joint_log(z1, z2, qd.n_pos, qd.n_neg, log_a, log_b);
        const double p = clip_prob(forward_binary(qd, layout, theta, subjective, work));
        value += logsumexp2(log_a + std::log(p), log_b + std::log1p(-p));
    }
    double penalty = 0.0;
    for (double x : theta) penalty += x * x;
    return value - lambda * penalty;
}

namespace {

LbfgsOptions lbfgs_options_from(const TrainConfig& config) {
    LbfgsOptions opts;
    opts.memory = config.lbfgs_memory;
    opts.max_iters = config.lbfgs_max_iters;
    opts.grad_tol = config.lbfgs_grad_tol;
    if (config.verbose) {
        opts.on_iteration = [](int iter, double value, double gnorm) {
            std::fprintf(stderr, "  lbfgs iter %4d  objective %.8f  |grad| %.3e\n", iter, value,
                         gnorm);
        };
    }
    return opts;
}

} // namespace

TrainResult train_model(const Corpus& corpus, std::span<const std::uint32_t> question_indices,
                        const TrainConfig& config) {
    const bool subjective = is_subjective_variant(config.variant);
    const bool open = is_open_variant(config.variant);

    TrainDataOptions dopts;
    dopts.build_pairs = open;
    dopts.neg_samples_per_answer = config.neg_samples_per_answer;
    dopts.seed = config.rng_seed;
    dopts.single_label_policy = config.single_label_policy;
    const TrainData data = build_train_data(corpus, question_indices, dopts);

    const ParamLayout layout =
        ParamLayout::make(config.variant, corpus.vocab.size(), data.users.size());
    std::vector<double> theta = layout.initial_point();
    const LbfgsOptions lopts = lbfgs_options_from(config);

    TrainResult result;
    result.users = data.users;

    if (is_em_variant(config.variant)) {
        TrainObjective mstep = TrainObjective::binary(data, layout, BinaryMode::EmComplete,
                                                      subjective, config.lambda, config.threads);
        double obs = observed_loglik(data, layout, theta, subjective, config.lambda);
        result.em_state.observed_loglik.push_back(obs);
        std::vector<double> best_theta = theta;
        double best_obs = obs;

        for (int round = 0; round < config.em_max_rounds; ++round) {
            EMState es = e_step(data, layout, theta, subjective);
            mstep.set_posteriors(es.t);
            LbfgsResult lr = lbfgs_minimize(
                [&](std::span<const double> x, std::span<double> g) { return mstep(x, g); },
                theta, lopts);
            result.total_lbfgs_iterations += lr.iterations;
            if (lr.status == LbfgsStatus::LineSearchFailed) {
                result.line_search_warning = true;
                std::fprintf(stderr,
                             "warning: M-step line search failed in round %d; keeping best point\n",
                             round + 1);
            }
            theta = std::move(lr.x);
            const double obs_new = observed_loglik(data, layout, theta, subjective, config.lambda);
            result.em_state.observed_loglik.push_back(obs_new);
            result.em_state.t = std::move(es.t);
            result.em_state.alpha = std::move(es.alpha);
            result.em_state.beta = std::move(es.beta);
            if (config.verbose) {
                std::fprintf(stderr, "em round %d observed loglik %.8f\n", round + 1, obs_new);
            }
            if (obs_new > best_obs) {
                best_obs = obs_new;
                best_theta = theta;
            }
            if (std::fabs(obs_new - obs) < config.em_rel_tol * std::fabs(obs_new)) {
                obs = obs_new;
                break;
            }
            obs = obs_new;
        }
        theta = std::move(best_theta);
        result.final_loglik = best_obs;
        result.objective_history = result.em_state.observed_loglik;
    } else {
        TrainObjective obj =
            open ? TrainObjective::open(data, layout, config.variant != Variant::SMoE, subjective,
                                        config.lambda, config.threads)
                 : TrainObjective::binary(data, layout,
                                          config.variant == Variant::KlMoE ? BinaryMode::Kl
                                                                           : BinaryMode::Single,
                                          subjective, config.lambda, config.threads);
        LbfgsResult lr = lbfgs_minimize(
            [&](std::span<const double> x, std::span<double> g) { return obj(x, g); }, theta,
            lopts);
        result.total_lbfgs_iterations = lr.iterations;
        if (lr.status == LbfgsStatus::LineSearchFailed) {
            result.line_search_warning = true;
            std::fprintf(stderr, "warning: line search failed; returning best point found\n");
        }
        theta = std::move(lr.x);
        result.final_loglik = -lr.value;
        result.objective_history.push_back(result.final_loglik);
        if (config.verbose) {
            std::fprintf(stderr, "lbfgs finished after %d iterations, loglik %.8f\n",
                         lr.iterations, result.final_loglik);
        }
    }

    result.params = layout.unpack(theta, data.users, config.lambda);
    result.params.variant = config.variant;
    return result;
}

} // namespace oqa
