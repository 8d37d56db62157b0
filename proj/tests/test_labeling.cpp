#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "oqa/labeling.hpp"
#include "oqa/train.hpp"
#include "testutil.hpp"

using namespace oqa;

TEST_CASE("is_binary_question rule behavior") {
    CHECK(is_binary_question("Is this a good lens for my Nikon D3300 camera?"));
    CHECK(is_binary_question("So, does it fit the 2015 model?"));
    CHECK(is_binary_question("Ok is there a warranty?"));
    CHECK(is_binary_question("Do I need the hose")); // unpunctuated question
    CHECK(is_binary_question("Would this be good for a beginner?"));

    CHECK(!is_binary_question("How long does the battery last?"));
    CHECK(!is_binary_question("What are the dimensions?"));
    CHECK(!is_binary_question("Looking for a case for my Galaxy S7."));
    CHECK(!is_binary_question("I need to know if it will fit.")); // declarative shape
    CHECK(!is_binary_question(""));
    CHECK(!is_binary_question("   "));
}

TEST_CASE("is_binary_question is a pure function of the text (property)") {
    Rng rng(47);
    const std::vector<std::string> words = {"is", "it",  "how", "does", "what", "fit",
                                            "so", "the", "a",   "good", "?",    "."};
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const std::size_t n = rng.uniform_int(8);
        for (std::size_t i = 0; i < n; ++i) {
            text += words[rng.uniform_int(words.size())] + " ";
        }
        CHECK(is_binary_question(text) == is_binary_question(text));
    }
}

TEST_CASE("miniset precision is at least 0.9 and recall is reported") {
    const std::string path = std::string(OQA_DATA_DIR) + "/binary_questions_miniset.jsonl";
    std::ifstream in(path);
    REQUIRE(in);

    int tp = 0, fp = 0, fn = 0, total = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto obj = nlohmann::json::parse(line);
        const bool truth = obj.at("is_binary").get<bool>();
        const bool pred = is_binary_question(obj.at("text").get<std::string>());
        if (pred && truth) ++tp;
        if (pred && !truth) ++fp;
        if (!pred && truth) ++fn;
        ++total;
    }
    CHECK(total == 50);
    const double precision = static_cast<double>(tp) / (tp + fp);
    const double recall = static_cast<double>(tp) / (tp + fn);
    CHECK(precision >= 0.9);
    MESSAGE("miniset precision ", precision, ", recall ", recall);
}

namespace {

Vocabulary vocab_from_texts(const std::vector<std::string>& texts) {
    std::vector<ExpertSentence> sents(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) sents[i].tokens = tokenize(texts[i]);
    return build_vocabulary(sents, 5000);
}

} // namespace

TEST_CASE("train_answer_labeler learns the yes direction and rejects one-class seeds") {
    std::vector<SeedAnswer> seeds;
    for (int i = 0; i < 10; ++i) {
        seeds.push_back({"yes it works fine " + std::to_string(i), 1});
        seeds.push_back({"no it failed again " + std::to_string(i), 0});
    }
    std::vector<std::string> texts;
    for (const auto& s : seeds) texts.push_back(s.text);
    const Vocabulary vocab = vocab_from_texts(texts);

    const LabelerModel model = train_answer_labeler(seeds, vocab);
    CHECK(model.weights[vocab.size()] > 0.0);     // first-word "yes"
    CHECK(model.weights[vocab.size() + 1] < 0.0); // first-word "no"

    // separable seeds: every seed scores toward its own class
    for (const auto& s : seeds) {
        const auto tokens = tokenize(s.text);
        const double p = model.probability(tokens, featurize(tokens, vocab));
        if (s.label == 1) CHECK(p >= 0.5);
        else CHECK(p < 0.5);
    }

    CHECK_THROWS_AS(train_answer_labeler({{"yes", 1}, {"yes again", 1}}, vocab), DataError);
}

TEST_CASE("labeler reaches 0.95 held-out accuracy on a rule-generated corpus") {
    // generator rule: positive answers open with yes/definitely, negatives with no/never
    Rng rng(53);
    const std::vector<std::string> pos_open = {"yes", "definitely", "yes"};
    const std::vector<std::string> neg_open = {"no", "never", "no"};
    const std::vector<std::string> filler = {"it", "works", "fits", "the", "model",
                                             "well", "for", "me", "fine", "at", "all"};
    auto make = [&](int label) {
        std::string text = label == 1 ? pos_open[rng.uniform_int(pos_open.size())]
                                      : neg_open[rng.uniform_int(neg_open.size())];
        const std::size_t n = 2 + rng.uniform_int(5);
        for (std::size_t i = 0; i < n; ++i) text += " " + filler[rng.uniform_int(filler.size())];
        return text;
    };

    std::vector<SeedAnswer> train_set, held_out;
    for (int i = 0; i < 120; ++i) {
        const int label = static_cast<int>(rng.uniform_int(2));
        (i < 60 ? train_set : held_out).push_back({make(label), label});
    }
    std::vector<std::string> texts;
    for (const auto& s : train_set) texts.push_back(s.text);
    const Vocabulary vocab = vocab_from_texts(texts);
    const LabelerModel model = train_answer_labeler(train_set, vocab);

    int correct = 0;
    for (const auto& s : held_out) {
        const auto tokens = tokenize(s.text);
        const int pred = model.probability(tokens, featurize(tokens, vocab)) >= 0.5 ? 1 : 0;
        if (pred == s.label) ++correct;
    }
    CHECK(static_cast<double>(correct) / held_out.size() >= 0.95);
}

TEST_CASE("label_answers keeps the most confident ceil(fraction * eligible)") {
    Corpus corpus;
    corpus.products.push_back(Product{"P", "c"});
    ExpertSentence s;
    s.sentence_id = "R#0";
    s.review_id = "R";
    s.product_id = "P";
    s.reviewer_id = "U";
    s.text = "yes no maybe works broken";
    corpus.sentences.push_back(std::move(s));

    const std::vector<std::string> answer_texts = {"yes works", "no broken", "maybe", "yes yes"};
    QuestionRecord q;
    q.question_id = "Q";
    q.product_id = "P";
    q.text = "does it work?";
    for (std::size_t i = 0; i < answer_texts.size(); ++i) {
        AnswerRecord a;
        a.answer_id = "A" + std::to_string(i);
        a.text = answer_texts[i];
        q.answers.push_back(std::move(a));
    }
    corpus.questions.push_back(std::move(q));
    finalize_corpus(corpus, 100);
    detect_binary_questions(corpus);
    REQUIRE(corpus.questions[0].qtype == QuestionType::Binary);

    std::vector<SeedAnswer> seeds = {{"yes works great", 1}, {"yes good", 1},
                                     {"no broken", 0},       {"no bad", 0}};
    const LabelerModel labeler = train_answer_labeler(seeds, corpus.vocab);

    const auto all = label_answers(corpus, labeler, 1.0);
    CHECK(all.size() == 4);
    const auto half = label_answers(corpus, labeler, 0.5);
    CHECK(half.size() == 2); // ceil(0.5 * 4)
    const auto tiny = label_answers(corpus, labeler, 0.3);
    CHECK(tiny.size() == 2); // ceil(0.3 * 4) = 2

    // kept confidences dominate every discarded one
    double min_kept = 1.0;
    for (const auto& la : half) min_kept = std::min(min_kept, la.confidence);
    for (const auto& la : all) {
        const bool kept = std::any_of(half.begin(), half.end(), [&](const LabeledAnswer& k) {
            return k.answer_id == la.answer_id;
        });
        if (!kept) CHECK(la.confidence <= min_kept);
        CHECK(la.confidence >= 0.5);
        CHECK(la.confidence <= 1.0);
    }

    CHECK_THROWS_AS(label_answers(corpus, labeler, 0.0), DataError);
    CHECK_THROWS_AS(label_answers(corpus, labeler, 1.5), DataError);
}

TEST_CASE("aggregate_labels counts and the ambiguity flag") {
    QuestionRecord q;
    q.question_id = "Q";
    for (int i = 0; i < 3; ++i) {
        AnswerRecord a;
        a.answer_id = "A" + std::to_string(i);
        q.answers.push_back(std::move(a));
    }

    // labels (1, 1, 0): r_q = 2/3, ambiguous
    std::vector<LabeledAnswer> kept = {{"A0", 1, 0.9}, {"A1", 1, 0.8}, {"A2", 0, 0.7}};
    aggregate_labels(q, kept);
    CHECK(q.n_pos == 2);
    CHECK(q.n_neg == 1);
    CHECK(q.n_total == 3);
    CHECK(q.pos_fraction() == doctest::Approx(2.0 / 3.0));
    CHECK(q.ambiguous);

    // labels (1, 1): not ambiguous; the dropped answer resets to unlabeled
    kept = {{"A0", 1, 0.9}, {"A1", 1, 0.8}};
    aggregate_labels(q, kept);
    CHECK(q.n_pos == 2);
    CHECK(q.n_neg == 0);
    CHECK(!q.ambiguous);
    CHECK(q.answers[2].label == -1);
    CHECK(q.pos_fraction() == doctest::Approx(1.0));
}
