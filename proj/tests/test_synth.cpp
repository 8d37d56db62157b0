#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oqa/synth.hpp"
#include "oqa/train.hpp"

using namespace oqa;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec spec;
    spec.n_questions = 300;
    spec.sentences_per_question = 12;
    spec.vocab_size = 200;
    spec.n_aspects = 20;
    spec.n_sentiment = 15;
    spec.n_reviewers = 40;
    spec.rng_seed = seed;
    return spec;
}

} // namespace

TEST_CASE("generate is deterministic under a fixed seed") {
    const SynthSpec spec = small_spec(7);
    const SynthResult a = generate(spec);
    const SynthResult b = generate(spec);

    REQUIRE(a.corpus.questions.size() == b.corpus.questions.size());
    for (std::size_t i = 0; i < a.corpus.questions.size(); ++i) {
        CHECK(a.corpus.questions[i].text == b.corpus.questions[i].text);
        CHECK(a.corpus.questions[i].n_pos == b.corpus.questions[i].n_pos);
    }
    REQUIRE(a.truth.size() == b.truth.size());
    for (std::size_t i = 0; i < a.truth.size(); ++i) {
        CHECK(a.truth[i].y_true == b.truth[i].y_true);
        CHECK(a.truth[i].p_true == b.truth[i].p_true);
    }
    CHECK(a.corpus.sentences.size() == b.corpus.sentences.size());
}

TEST_CASE("unanimous labels when alpha = beta = 1") {
    SynthSpec spec = small_spec(11);
    spec.planted_alpha = 1.0;
    spec.planted_beta = 1.0;
    const SynthResult res = generate(spec);
    std::size_t ambiguous = 0;
    for (const auto& q : res.corpus.questions) {
        CHECK(q.n_total == 3);
        if (q.ambiguous) ++ambiguous;
    }
    CHECK(ambiguous == 0);
}

TEST_CASE("label counts always add up and match the drawn count distribution") {
    SynthSpec spec = small_spec(13);
    spec.labels_per_question = {0.5, 0, 0, 0, 0.5}; // half 1 label, half 5
    const SynthResult res = generate(spec);
    std::size_t ones = 0, fives = 0;
    for (const auto& q : res.corpus.questions) {
        CHECK(q.n_pos + q.n_neg == q.n_total);
        CHECK(static_cast<std::size_t>(q.n_total) == q.answers.size());
        if (q.n_total == 1) ++ones;
        if (q.n_total == 5) ++fives;
    }
    CHECK(ones + fives == res.corpus.questions.size());
    CHECK(ones > 100);
    CHECK(fives > 100);
}

TEST_CASE("empirical ambiguity tracks the exact enumeration oracle") {
    SynthSpec spec = small_spec(17);
    spec.n_questions = 2000;      // tighter empirical estimate
    spec.planted_alpha = 0.85;
    spec.planted_beta = 0.90;
    const SynthResult res = generate(spec);

    // enumerate all 2^3 label outcomes per question: P(ambiguous | y) is one
    // minus the two unanimous outcomes
    double expected = 0.0;
    for (const auto& g : res.truth) {
        const double pa = spec.planted_alpha;
        const double pb = spec.planted_beta;
        const double amb_pos = 1.0 - pa * pa * pa - (1 - pa) * (1 - pa) * (1 - pa);
        const double amb_neg = 1.0 - pb * pb * pb - (1 - pb) * (1 - pb) * (1 - pb);
        expected += g.p_true * amb_pos + (1.0 - g.p_true) * amb_neg;
    }
    expected /= static_cast<double>(res.truth.size());

    double empirical = 0.0;
    for (const auto& q : res.corpus.questions) {
        if (q.ambiguous) empirical += 1.0;
    }
    empirical /= static_cast<double>(res.corpus.questions.size());

    CHECK(std::fabs(empirical - expected) < 0.03);
}

TEST_CASE("hidden labels follow the planted probabilities (law of large numbers)") {
    SynthSpec spec;
    spec.rng_seed = 19;
    const SynthResult res = generate(spec); // default 2000 questions

    double mean_y = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < res.truth.size(); ++i) {
        if (res.truth[i].p_true > 0.7) {
            mean_y += res.truth[i].y_true;
            ++n;
        }
    }
    REQUIRE(n >= 50); // the high-confidence tail must exist
    mean_y /= static_cast<double>(n);
    CHECK(mean_y > 0.7);

    // and probabilities spread on both sides
    std::size_t low = 0;
    for (const auto& g : res.truth) {
        if (g.p_true < 0.3) ++low;
    }
    CHECK(low >= 50);
}

TEST_CASE("written JSONL round-trips through ingest to the same corpus") {
    SynthSpec spec = small_spec(23);
    spec.n_questions = 40;
    const SynthResult res = generate(spec);

    const auto dir = std::filesystem::temp_directory_path() / "oqa_synth_rt";
    std::filesystem::remove_all(dir);
    write_synth_jsonl(res, dir.string());

    const Corpus loaded = ingest((dir / "products.jsonl").string(),
                                 (dir / "questions.jsonl").string(),
                                 (dir / "answers.jsonl").string(),
                                 (dir / "reviews.jsonl").string(),
                                 IngestOptions{spec.vocab_size});

    CHECK(loaded.products.size() == res.corpus.products.size());
    CHECK(loaded.questions.size() == res.corpus.questions.size());
    REQUIRE(loaded.sentences.size() == res.corpus.sentences.size());
    for (std::size_t i = 0; i < loaded.sentences.size(); ++i) {
        CHECK(loaded.sentences[i].text == res.corpus.sentences[i].text);
        CHECK(loaded.sentences[i].sentence_id == res.corpus.sentences[i].sentence_id);
        CHECK(loaded.sentences[i].rating == res.corpus.sentences[i].rating);
    }
    CHECK(loaded.vocab.index_to_token == res.corpus.vocab.index_to_token);
    CHECK(loaded.stats.avg_sentence_len ==
          doctest::Approx(res.corpus.stats.avg_sentence_len).epsilon(1e-12));
    // answers arrive unlabeled from JSONL; the labeling pipeline recovers them
    for (const auto& q : loaded.questions) {
        for (const auto& a : q.answers) CHECK(a.label == -1);
    }
}
