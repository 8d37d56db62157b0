#include <doctest.h>

#include <cmath>

#include "oqa/eval.hpp"
#include "oqa/train.hpp"
#include "testutil.hpp"

using namespace oqa;

namespace {

std::vector<std::uint32_t> all_questions(const Corpus& corpus) {
    std::vector<std::uint32_t> ids(corpus.questions.size());
    for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
}

// single product / single sentence / single question fixture where p_q is a
// direct sigmoid of the xi weight on the sentence's only token
struct TinyFixture {
    Corpus corpus;
    TrainData data;
    ParamLayout layout;

    explicit TinyFixture(Variant variant, int n_pos, int n_neg) {
        corpus.products.push_back(Product{"P", "c"});
        ExpertSentence s;
        s.sentence_id = "R#0";
        s.review_id = "R";
        s.product_id = "P";
        s.reviewer_id = "U";
        s.text = "good";
        s.rating = 3;
        corpus.sentences.push_back(std::move(s));

        QuestionRecord q;
        q.question_id = "Q";
        q.product_id = "P";
        q.text = "zzz unseen words?"; // OOV on purpose: f_q stays empty
        q.qtype = QuestionType::Binary;
        for (int i = 0; i < n_pos + n_neg; ++i) {
            AnswerRecord a;
            a.answer_id = "A" + std::to_string(i);
            a.text = i < n_pos ? "yes" : "no";
            a.top_voted = i == 0;
            q.answers.push_back(std::move(a));
        }
        corpus.questions.push_back(std::move(q));
        finalize_corpus(corpus, 100);

        auto& qq = corpus.questions[0];
        qq.n_pos = n_pos;
        qq.n_neg = n_neg;
        qq.n_total = n_pos + n_neg;
        for (int i = 0; i < n_pos + n_neg; ++i) qq.answers[i].label = i < n_pos ? 1 : 0;

        const std::vector<std::uint32_t> ids = {0};
        data = build_train_data(corpus, ids, {});
        layout = ParamLayout::make(variant, corpus.vocab.size(), data.users.size());
    }
};

} // namespace

TEST_CASE("loglik_single: zero params give -|Q| ln 2; worked single question") {
    Corpus corpus = testutil::random_corpus(1, 12);
    const auto ids = all_questions(corpus);
    TrainData data = build_train_data(corpus, ids, {});
    const ParamLayout layout = ParamLayout::make(Variant::MoE, corpus.vocab.size(), 0);
    auto obj = TrainObjective::binary(data, layout, BinaryMode::Single, false, 0.0);

    std::vector<double> grad(layout.total);
    const double value = obj(std::vector<double>(layout.total, 0.0), grad);
    // minimization form: -loglik
    CHECK(value ==
          doctest::Approx(static_cast<double>(data.questions.size()) * std::log(2.0))
              .epsilon(1e-12));

    // y = 1, p = 0.8: loglik = ln 0.8 = -0.2231
    TinyFixture tiny(Variant::MoE, 1, 0);
    auto tobj = TrainObjective::binary(tiny.data, tiny.layout, BinaryMode::Single, false, 0.0);
    std::vector<double> theta(tiny.layout.total, 0.0);
    theta[tiny.layout.xi + *tiny.corpus.vocab.lookup("good")] = std::log(4.0); // sigma = 0.8
    std::vector<double> g(tiny.layout.total);
    CHECK(-tobj(theta, g) == doctest::Approx(std::log(0.8)).epsilon(1e-12));
    CHECK(-tobj(theta, g) == doctest::Approx(-0.2231).epsilon(1e-3));
}

TEST_CASE("loglik_kl reduces to loglik_single on unanimous labels") {
    Corpus corpus = testutil::random_corpus(2, 15);
    // force unanimity, single label = the unanimous one
    for (auto& q : corpus.questions) {
        const int y = fnv1a(q.question_id) % 2;
        q.n_pos = y == 1 ? q.n_total : 0;
        q.n_neg = q.n_total - q.n_pos;
        for (auto& a : q.answers) a.label = y;
        q.ambiguous = false;
    }
    const auto ids = all_questions(corpus);
    TrainData data = build_train_data(corpus, ids, {});
    const ParamLayout layout = ParamLayout::make(Variant::MoE, corpus.vocab.size(), 0);
    auto single = TrainObjective::binary(data, layout, BinaryMode::Single, false, 1e-3);
    auto kl = TrainObjective::binary(data, layout, BinaryMode::Kl, false, 1e-3);

    const auto theta = testutil::random_point(layout.total, 77);
    std::vector<double> g1(layout.total), g2(layout.total);
    const double v1 = single(theta, g1);
    const double v2 = kl(theta, g2);
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-9));
    }

    // one question, r_q = 1, p = 0.8 -> ln 0.8
    TinyFixture tiny(Variant::KlMoE, 2, 0);
    auto tkl = TrainObjective::binary(tiny.data, tiny.layout, BinaryMode::Kl, false, 0.0);
    std::vector<double> theta2(tiny.layout.total, 0.0);
    theta2[tiny.layout.xi + *tiny.corpus.vocab.lookup("good")] = std::log(4.0);
    std::vector<double> g(tiny.layout.total);
    CHECK(-tkl(theta2, g) == doctest::Approx(std::log(0.8)).epsilon(1e-12));
}

TEST_CASE("sensitivity/specificity head and label joint worked values") {
    FeatureVector empty;
    std::vector<double> gamma1(1, std::log(4.0)); // vocab = 0: only the bias coordinate
    std::vector<double> gamma2(1, 0.0);
    double alpha, beta;
    sensitivity_specificity(empty, gamma1, gamma2, 0, alpha, beta);
    CHECK(alpha == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(beta == doctest::Approx(0.5).epsilon(1e-12));

    // a_q = 0.9^2 * 0.1 = 0.081
    double log_a, log_b;
    const double z_alpha09 = std::log(0.9 / 0.1);
    label_joint_log(z_alpha09, 0.0, 2, 1, log_a, log_b);
    CHECK(std::exp(log_a) == doctest::Approx(0.081).epsilon(1e-9));

    // b_q = (1-0.7)^1 * 0.7^2 = 0.147
    const double z_beta07 = std::log(0.7 / 0.3);
    label_joint_log(0.0, z_beta07, 1, 2, log_a, log_b);
    CHECK(std::exp(log_b) == doctest::Approx(0.147).epsilon(1e-9));

    // n = 0: empty products are 1
    label_joint_log(1.3, -0.4, 0, 0, log_a, log_b);
    CHECK(log_a == 0.0);
    CHECK(log_b == 0.0);
}

TEST_CASE("e_step posterior worked value and symmetric-evidence identity") {
    // alpha = beta = 0.8, n+ = 2, n- = 0, p = 0.5 -> t = 0.32/0.34 = 0.9412
    TinyFixture tiny(Variant::EmMoE, 2, 0);
    std::vector<double> theta = tiny.layout.initial_point(); // gamma biases = ln 4 -> 0.8
    const EMState state = e_step(tiny.data, tiny.layout, theta, false);
    CHECK(state.alpha[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(state.beta[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(state.t[0] == doctest::Approx(0.9412).epsilon(1e-4));
    CHECK(state.t[0] == doctest::Approx(16.0 / 17.0).epsilon(1e-12));

    // a_q = b_q -> t = p on random fixtures
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const double la = std::log(rng.uniform() + 1e-3);
        const double p = rng.uniform() * 0.98 + 0.01;
        CHECK(posterior_t(la, la, p) == doctest::Approx(p).epsilon(1e-9));
    }

    // p clipped high with a_q > 0 pushes t to 1
    CHECK(posterior_t(std::log(0.5), std::log(0.5), 1.0) > 1.0 - 1e-9);
}

TEST_CASE("expected complete loglik worked value and observed loglik") {
    TinyFixture tiny(Variant::EmMoE, 2, 0);
    std::vector<double> theta = tiny.layout.initial_point();

    auto obj = TrainObjective::binary(tiny.data, tiny.layout, BinaryMode::EmComplete, false, 0.0);
    const EMState state = e_step(tiny.data, tiny.layout, theta, false);
    obj.set_posteriors(state.t);
    std::vector<double> grad(tiny.layout.total);
    const double value = -obj(theta, grad); // maximization sense, lambda = 0

    const double t = 16.0 / 17.0;
    const double expected = t * std::log(0.64 * 0.5) + (1.0 - t) * std::log(0.04 * 0.5);
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(value == doctest::Approx(-1.302).epsilon(1e-3));

    // observed loglik: ln(0.34); lambda = 0 so the penalty vanishes
    const double obs = observed_loglik(tiny.data, tiny.layout, theta, false, 0.0);
    CHECK(obs == doctest::Approx(std::log(0.34)).epsilon(1e-12));
    CHECK(obs == doctest::Approx(-1.0788).epsilon(1e-4));

    // t in {0,1} with a = b = 1 reduces to the single-label summand
    TinyFixture red(Variant::EmMoE, 1, 0);
    auto robj = TrainObjective::binary(red.data, red.layout, BinaryMode::EmComplete, false, 0.0);
    robj.set_posteriors({1.0});
    std::vector<double> rtheta(red.layout.total, 0.0); // gamma = 0 -> alpha = beta = 0.5
    std::vector<double> rgrad(red.layout.total);
    // log a = 1*log(0.5): with n=1 labels a_q = alpha = 0.5, so subtract it back
    const double em_value = -robj(rtheta, rgrad);
    CHECK(em_value == doctest::Approx(std::log(0.5) + std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences on all objectives") {
    Corpus corpus = testutil::random_corpus(3, 20);
    const auto ids = all_questions(corpus);

    TrainDataOptions dopts;
    dopts.build_pairs = true;
    dopts.neg_samples_per_answer = 1;
    dopts.seed = 9;
    TrainData data = build_train_data(corpus, ids, dopts);

    struct Case {
        const char* name;
        Variant variant;
        bool open;
        BinaryMode mode;
        bool multi;
        bool subjective;
    };
    const std::vector<Case> cases = {
        {"single", Variant::MoE, false, BinaryMode::Single, false, false},
        {"kl", Variant::KlMoE, false, BinaryMode::Kl, false, false},
        {"em", Variant::EmMoE, false, BinaryMode::EmComplete, false, false},
        {"em-s", Variant::EmMoES, false, BinaryMode::EmComplete, false, true},
        {"open-single", Variant::SMoE, true, BinaryMode::Single, false, false},
        {"open-multi", Variant::MMoE, true, BinaryMode::Single, true, false},
        {"open-multi-s", Variant::MMoES, true, BinaryMode::Single, true, true},
    };

    for (const auto& c : cases) {
        CAPTURE(c.name);
        const ParamLayout layout =
            ParamLayout::make(c.variant, corpus.vocab.size(), data.users.size());
        TrainObjective obj =
            c.open ? TrainObjective::open(data, layout, c.multi, c.subjective, 1e-3)
                   : TrainObjective::binary(data, layout, c.mode, c.subjective, 1e-3);
        if (c.mode == BinaryMode::EmComplete) {
            std::vector<double> t(data.questions.size());
            Rng rng(101);
            for (auto& x : t) x = 0.05 + 0.9 * rng.uniform();
            obj.set_posteriors(std::move(t));
        }
        for (int point = 0; point < 3; ++point) {
            const auto theta =
                testutil::random_point(layout.total, 1000 + 31 * point, 0.5);
            const double err = testutil::max_grad_rel_err(
                [&](std::span<const double> x, std::span<double> g) { return obj(x, g); },
                theta);
            CAPTURE(point);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("train objective agrees with the public moe prediction path") {
    Corpus corpus = testutil::random_corpus(4, 10);
    const auto ids = all_questions(corpus);
    TrainData data = build_train_data(corpus, ids, {});
    const ParamLayout layout =
        ParamLayout::make(Variant::EmMoES, corpus.vocab.size(), data.users.size());
    auto obj = TrainObjective::binary(data, layout, BinaryMode::Single, true, 0.0);

    const auto theta = testutil::random_point(layout.total, 55);
    std::vector<double> grad(layout.total);
    const double value = -obj(theta, grad);

    const ModelParams params = layout.unpack(theta, data.users, 0.0);
    double expected = 0.0;
    for (const auto& qd : data.questions) {
        if (qd.y_single < 0) continue;
        const auto& q = corpus.questions[qd.question_index];
        std::vector<const ExpertSentence*> sents;
        for (auto si : corpus.sentences_for(q)) sents.push_back(&corpus.sentences[si]);
        const double p = clip_prob(predict_binary(q, sents, corpus.stats, params).combined);
        expected += qd.y_single == 1 ? std::log(p) : std::log1p(-p);
    }
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("open objectives: multi with singleton answers equals single") {
    Corpus corpus = testutil::random_corpus(6, 14);
    for (auto& q : corpus.questions) q.answers.resize(1); // singleton answer sets
    finalize_corpus(corpus, 5000);
    for (auto& q : corpus.questions) {
        q.answers[0].label = 1;
        q.n_pos = q.n_total = 1;
        q.n_neg = 0;
    }
    const auto ids = all_questions(corpus);
    TrainDataOptions dopts;
    dopts.build_pairs = true;
    dopts.seed = 4;
    TrainData data = build_train_data(corpus, ids, dopts);
    const ParamLayout layout = ParamLayout::make(Variant::SMoE, corpus.vocab.size(), 0);

    auto single = TrainObjective::open(data, layout, false, false, 1e-3);
    auto multi = TrainObjective::open(data, layout, true, false, 1e-3);
    const auto theta = testutil::random_point(layout.total, 66);
    std::vector<double> g1(layout.total), g2(layout.total);
    CHECK(single(theta, g1) == doctest::Approx(multi(theta, g2)).epsilon(1e-12));
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-9));
    }

    // zero params: every pair scores 0.5
    std::vector<double> zeros(layout.total, 0.0);
    std::size_t n_pairs = 0;
    for (const auto& qd : data.questions) n_pairs += qd.pairs.size();
    CHECK(-multi(zeros, g1) ==
          doctest::Approx(-static_cast<double>(n_pairs) * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("subjective objectives with zeroed subjective blocks match base variants") {
    Corpus corpus = testutil::random_corpus(8, 12);
    const auto ids = all_questions(corpus);
    TrainDataOptions dopts;
    dopts.build_pairs = true;
    dopts.seed = 2;
    TrainData data = build_train_data(corpus, ids, dopts);

    // binary: EM-MoE-S over a theta whose subjective blocks are zero
    const ParamLayout base = ParamLayout::make(Variant::EmMoE, corpus.vocab.size(), 0);
    const ParamLayout subj =
        ParamLayout::make(Variant::EmMoES, corpus.vocab.size(), data.users.size());
    auto obj_base = TrainObjective::binary(data, base, BinaryMode::EmComplete, false, 0.0);
    auto obj_subj = TrainObjective::binary(data, subj, BinaryMode::EmComplete, true, 0.0);
    std::vector<double> t(data.questions.size(), 0.7);
    obj_base.set_posteriors(t);
    obj_subj.set_posteriors(t);

    const auto theta_base = testutil::random_point(base.total, 88);
    std::vector<double> theta_subj(subj.total, 0.0);
    std::copy(theta_base.begin(), theta_base.end(), theta_subj.begin()); // shared prefix
    std::vector<double> g1(base.total), g2(subj.total);
    CHECK(obj_base(theta_base, g1) == doctest::Approx(obj_subj(theta_subj, g2)).epsilon(1e-12));

    // open: m-MoE-S vs m-MoE
    const ParamLayout ob = ParamLayout::make(Variant::MMoE, corpus.vocab.size(), 0);
    const ParamLayout os =
        ParamLayout::make(Variant::MMoES, corpus.vocab.size(), data.users.size());
    auto open_base = TrainObjective::open(data, ob, true, false, 0.0);
    auto open_subj = TrainObjective::open(data, os, true, true, 0.0);
    const auto tb = testutil::random_point(ob.total, 99);
    std::vector<double> tsub(os.total, 0.0);
    std::copy(tb.begin(), tb.end(), tsub.begin());
    std::vector<double> g3(ob.total), g4(os.total);
    CHECK(open_base(tb, g3) == doctest::Approx(open_subj(tsub, g4)).epsilon(1e-12));
}

TEST_CASE("EM training: monotone observed loglik, determinism, best-params return") {
    Corpus corpus = testutil::random_corpus(10, 30);
    const auto ids = all_questions(corpus);

    TrainConfig config;
    config.variant = Variant::EmMoE;
    config.em_max_rounds = 8;
    config.lbfgs_max_iters = 40;
    config.rng_seed = 3;

    const TrainResult r1 = train_model(corpus, ids, config);
    const TrainResult r2 = train_model(corpus, ids, config);

    REQUIRE(r1.em_state.observed_loglik.size() >= 2);
    for (std::size_t i = 1; i < r1.em_state.observed_loglik.size(); ++i) {
        const double prev = r1.em_state.observed_loglik[i - 1];
        const double cur = r1.em_state.observed_loglik[i];
        CHECK(cur >= prev - 1e-8 * std::max(1.0, std::fabs(cur)));
    }

    // bitwise determinism
    CHECK(r1.params.kappa[0] == r2.params.kappa[0]);
    CHECK(r1.params.eta == r2.params.eta);
    CHECK(r1.params.mu == r2.params.mu);
    CHECK(r1.params.xi == r2.params.xi);
    CHECK(r1.params.gamma1 == r2.params.gamma1);
    CHECK(r1.final_loglik == r2.final_loglik);

    // the returned params reproduce the best observed loglik
    const TrainData data = build_train_data(corpus, ids, {});
    const ParamLayout layout =
        ParamLayout::make(Variant::EmMoE, corpus.vocab.size(), data.users.size());
    const auto theta = layout.pack(r1.params, data.users);
    const double obs = observed_loglik(data, layout, theta, false, config.lambda);
    const double best =
        *std::max_element(r1.em_state.observed_loglik.begin(), r1.em_state.observed_loglik.end());
    CHECK(obs == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("large lambda drives weights to zero and predictions to one half") {
    Corpus corpus = testutil::random_corpus(12, 15);
    const auto ids = all_questions(corpus);
    TrainConfig config;
    config.variant = Variant::MoE;
    config.lambda = 1e6;
    const TrainResult res = train_model(corpus, ids, config);
    for (double v : res.params.eta) CHECK(std::fabs(v) < 1e-5);
    for (double v : res.params.mu) CHECK(std::fabs(v) < 1e-5);
    for (double v : res.params.xi) CHECK(std::fabs(v) < 1e-5);
    CHECK(std::fabs(res.params.kappa[0]) < 1e-5);

    for (const auto& q : corpus.questions) {
        std::vector<const ExpertSentence*> sents;
        for (auto si : corpus.sentences_for(q)) sents.push_back(&corpus.sentences[si]);
        if (sents.empty()) continue;
        CHECK(predict_binary(q, sents, corpus.stats, res.params).combined ==
              doctest::Approx(0.5).epsilon(1e-4));
    }
}

TEST_CASE("threaded objective evaluation matches single-threaded bitwise-stably") {
    Corpus corpus = testutil::random_corpus(14, 24);
    const auto ids = all_questions(corpus);
    TrainData data = build_train_data(corpus, ids, {});
    const ParamLayout layout = ParamLayout::make(Variant::MoE, corpus.vocab.size(), 0);
    auto obj1 = TrainObjective::binary(data, layout, BinaryMode::Single, false, 1e-3, 1);
    auto obj4 = TrainObjective::binary(data, layout, BinaryMode::Single, false, 1e-3, 4);

    const auto theta = testutil::random_point(layout.total, 7);
    std::vector<double> g1(layout.total), g4(layout.total);
    const double v1 = obj1(theta, g1);
    const double v4a = obj4(theta, g4);
    const double v4b = obj4(theta, g1); // rerun with the same thread count
    CHECK(v4a == v4b);
    CHECK(v1 == doctest::Approx(v4a).epsilon(1e-12));

    std::vector<double> g4b(layout.total);
    obj4(theta, g4b);
    CHECK(g4b == g4); // deterministic for a fixed thread count
}
