// Command-line front end: ingest -> label -> train -> eval, plus ad-hoc
// queries and the synthetic corpus generator.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oqa/artifact.hpp"
#include "oqa/corpus.hpp"
#include "oqa/eval.hpp"
#include "oqa/labeling.hpp"
#include "oqa/moe.hpp"
#include "oqa/synth.hpp"
#include "oqa/train.hpp"

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct GlobalOpts {
    std::uint64_t seed = 1;
    int threads = 1;
};

std::vector<std::uint32_t> split_questions(const oqa::Corpus& corpus, const std::string& split) {
    std::vector<std::uint32_t> ids;
    for (std::uint32_t i = 0; i < corpus.questions.size(); ++i) {
        const bool train = oqa::in_train_split(corpus.questions[i].question_id);
        if (split == "all" || (split == "train" && train) || (split == "test" && !train)) {
            ids.push_back(i);
        }
    }
    return ids;
}

std::string category_of(const oqa::Corpus& corpus, const oqa::QuestionRecord& q) {
    auto it = corpus.product_index.find(q.product_id);
    return it == corpus.product_index.end() ? std::string("unknown")
                                            : corpus.products[it->second].category;
}

int cmd_ingest(const std::string& products, const std::string& questions,
               const std::string& answers, const std::string& reviews, const std::string& out,
               std::size_t vocab_size) {
    const oqa::Corpus corpus =
        oqa::ingest(products, questions, answers, reviews, oqa::IngestOptions{vocab_size});

    struct Counts {
        std::set<std::string> products, reviews;
        std::size_t questions = 0, answers = 0;
    };
    std::map<std::string, Counts> per_category;
    std::map<std::string, std::string> product_category;
    for (const auto& p : corpus.products) {
        product_category[p.product_id] = p.category;
        per_category[p.category].products.insert(p.product_id);
    }
    for (const auto& s : corpus.sentences) {
        per_category[product_category[s.product_id]].reviews.insert(s.review_id);
    }
    for (const auto& q : corpus.questions) {
        auto& c = per_category[product_category[q.product_id]];
        ++c.questions;
        c.answers += q.answers.size();
    }

    std::printf("%-24s %10s %10s %10s %10s\n", "category", "#products", "#questions", "#answers",
                "#reviews");
    std::size_t tp = 0, tq = 0, ta = 0, tr = 0;
    for (const auto& [cat, c] : per_category) {
        std::printf("%-24s %10zu %10zu %10zu %10zu\n", cat.c_str(), c.products.size(),
                    c.questions, c.answers, c.reviews.size());
        tp += c.products.size();
        tq += c.questions;
        ta += c.answers;
        tr += c.reviews.size();
    }
    std::printf("%-24s %10zu %10zu %10zu %10zu\n", "total", tp, tq, ta, tr);
    std::printf(
        "sentences: %zu  vocabulary: %zu  dropped: %llu questions, %llu answers, %llu reviews\n",
        corpus.sentences.size(), corpus.vocab.size(),
        static_cast<unsigned long long>(corpus.report.dropped_questions),
        static_cast<unsigned long long>(corpus.report.dropped_answers),
        static_cast<unsigned long long>(corpus.report.dropped_reviews));

    oqa::save_corpus_cache(corpus, out);
    std::printf("wrote corpus cache to %s\n", out.c_str());
    return 0;
}

int cmd_label(const std::string& cache, const std::string& seeds_path, const std::string& out,
              const std::string& labels_out, double keep_fraction) {
    oqa::Corpus corpus = oqa::load_corpus_cache(cache);
    const auto seeds = oqa::load_seed_answers(seeds_path);
    if (seeds.empty()) throw oqa::DataError(seeds_path + ": seed file is empty");

    const std::size_t n_binary = oqa::detect_binary_questions(corpus);
    const oqa::LabelerModel labeler = oqa::train_answer_labeler(seeds, corpus.vocab);
    const auto kept = oqa::label_answers(corpus, labeler, keep_fraction);
    oqa::apply_labels(corpus, kept);

    std::size_t eligible = 0;
    for (const auto& q : corpus.questions) {
        if (q.qtype == oqa::QuestionType::Binary) eligible += q.answers.size();
    }
    std::size_t positives = 0;
    for (const auto& la : kept) positives += la.label;
    std::size_t labeled_questions = 0, multi_label = 0, ambiguous = 0;
    for (const auto& q : corpus.questions) {
        if (q.n_total > 0) ++labeled_questions;
        if (q.n_total > 1) ++multi_label;
        if (q.ambiguous) ++ambiguous;
    }

    std::printf("binary questions detected: %zu / %zu\n", n_binary, corpus.questions.size());
    std::printf("answers labeled: %zu of %zu eligible (keep fraction %.2f)\n", kept.size(),
                eligible, keep_fraction);
    if (!kept.empty()) {
        std::printf("positive share among kept labels: %.1f%%\n",
                    100.0 * static_cast<double>(positives) / kept.size());
    }
    if (labeled_questions > 0) {
        std::printf("questions with labels: %zu (%zu with several labels)\n", labeled_questions,
                    multi_label);
        std::printf("ambiguous questions: %zu (%.1f%% of labeled)\n", ambiguous,
                    100.0 * static_cast<double>(ambiguous) / labeled_questions);
    }

    if (!labels_out.empty()) {
        std::ofstream lo(labels_out);
        if (!lo) throw oqa::DataError("cannot write " + labels_out);
        for (const auto& la : kept) {
            lo << json{{"answer_id", la.answer_id},
                       {"label", la.label},
                       {"confidence", la.confidence}}
                      .dump()
               << "\n";
        }
        std::printf("wrote labels to %s\n", labels_out.c_str());
    }

    oqa::save_corpus_cache(corpus, out);
    std::printf("wrote labeled corpus cache to %s\n", out.c_str());
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& cache, const std::string& variant_name,
              const std::string& out, oqa::TrainConfig config, const std::string& split,
              const std::string& scope) {
    config.variant = oqa::variant_from_name(variant_name);
    config.rng_seed = g.seed;
    config.threads = g.threads;

    const oqa::Corpus corpus = oqa::load_corpus_cache(cache);
    std::vector<std::uint32_t> ids = split_questions(corpus, split);

    if (oqa::is_open_variant(config.variant)) {
        std::vector<std::uint32_t> open_ids, answered_ids;
        for (std::uint32_t i : ids) {
            const auto& q = corpus.questions[i];
            if (q.answers.empty()) continue;
            answered_ids.push_back(i);
            if (q.qtype == oqa::QuestionType::Open) open_ids.push_back(i);
        }
        if (scope == "open" || (scope == "auto" && !open_ids.empty())) {
            ids = std::move(open_ids);
        } else {
            ids = std::move(answered_ids);
        }
        if (ids.empty()) throw oqa::DataError("no answered questions available for training");
    } else {
        std::vector<std::uint32_t> labeled;
        for (std::uint32_t i : ids) {
            if (corpus.questions[i].n_total > 0) labeled.push_back(i);
        }
        if (labeled.empty()) {
            throw oqa::DataError("variant '" + std::string(oqa::variant_name(config.variant)) +
                                 "' needs binary-labeled questions; run the label command first");
        }
        ids = std::move(labeled);
    }

    std::printf("training %s on %zu questions (split %s)\n", oqa::variant_name(config.variant),
                ids.size(), split.c_str());
    const auto start = std::chrono::steady_clock::now();
    const oqa::TrainResult result = oqa::train_model(corpus, ids, config);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (std::size_t i = 0; i < result.objective_history.size(); ++i) {
        std::printf("  %s %zu: objective %.6f\n",
                    oqa::is_em_variant(config.variant) ? "em round" : "run", i,
                    result.objective_history[i]);
    }
    std::printf("finished in %.2f s, %d L-BFGS iterations, final loglik %.6f\n", secs,
                result.total_lbfgs_iterations, result.final_loglik);

    oqa::ModelArtifact artifact;
    artifact.variant = config.variant;
    artifact.vocab = corpus.vocab;
    artifact.stats = corpus.stats;
    artifact.params = result.params;
    artifact.config = config;
    artifact.metrics["final_loglik"] = result.final_loglik;
    artifact.metrics["lbfgs_iterations"] = result.total_lbfgs_iterations;
    artifact.metrics["train_questions"] = static_cast<double>(ids.size());
    artifact.metrics["train_seconds"] = secs;
    if (oqa::is_em_variant(config.variant)) {
        artifact.metrics["em_rounds"] =
            static_cast<double>(result.em_state.observed_loglik.size()) - 1.0;
    }
    oqa::save_artifact(artifact, out);
    std::printf("wrote model artifact to %s\n", out.c_str());
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& cache, const std::string& model,
             const std::string& out, const std::string& split, int neg_per_answer) {
    const oqa::Corpus corpus = oqa::load_corpus_cache(cache);
    const oqa::ModelArtifact artifact = oqa::load_artifact(model);
    const std::vector<std::uint32_t> ids = split_questions(corpus, split);
    if (ids.empty()) throw oqa::DataError("no questions in the requested split");

    std::map<std::string, std::vector<std::uint32_t>> by_category;
    for (std::uint32_t i : ids) {
        by_category[category_of(corpus, corpus.questions[i])].push_back(i);
    }

    json rows = json::array();
    for (const auto& [category, qids] : by_category) {
        std::unordered_map<std::string, double> preds;
        std::vector<oqa::QuestionRecord> labeled;
        for (std::uint32_t qi : qids) {
            const auto& q = corpus.questions[qi];
            if (q.n_total == 0) continue;
            const auto& sent_ids = corpus.sentences_for(q);
            if (sent_ids.empty()) continue;
            std::vector<const oqa::ExpertSentence*> sents;
            for (auto si : sent_ids) sents.push_back(&corpus.sentences[si]);
            preds[q.question_id] =
                oqa::predict_binary(q, sents, corpus.stats, artifact.params).combined;
            labeled.push_back(q);
        }

        double auc_o = -1.0;
        if (oqa::is_open_variant(artifact.variant)) {
            std::vector<std::uint32_t> open_ids;
            for (std::uint32_t qi : qids) {
                const auto& q = corpus.questions[qi];
                if (!q.answers.empty() && !corpus.sentences_for(q).empty()) {
                    open_ids.push_back(qi);
                }
            }
            if (!open_ids.empty()) {
                try {
                    const auto eval_set =
                        oqa::sample_non_answers(corpus, open_ids, neg_per_answer, g.seed);
                    auc_o = oqa::auc_open(corpus, artifact.params, eval_set);
                } catch (const oqa::DataError&) {
                    // pool too small for this category: leave AUC_o null
                }
            }
        }

        for (const auto standard : {oqa::Standard::Silver, oqa::Standard::Gold}) {
            const oqa::BinaryTestSet testset = standard == oqa::Standard::Silver
                                                   ? oqa::build_silver(labeled)
                                                   : oqa::build_gold(labeled);
            bool pos = false, neg = false;
            for (const auto& [qid, y] : testset.items) (y == 1 ? pos : neg) = true;
            if (!(pos && neg)) continue; // AUC undefined for single-class sets

            json row;
            row["category"] = category;
            row["variant"] = oqa::variant_name(artifact.variant);
            row["standard"] = standard == oqa::Standard::Silver ? "silver" : "gold";
            row["auc_b"] = oqa::auc_binary(preds, testset);
            json acc;
            for (int ai = 0; ai < 10; ++ai) {
                char key[8];
                std::snprintf(key, sizeof(key), "%.1f", ai / 10.0);
                acc[key] = oqa::accuracy_at(preds, testset, ai / 10.0);
            }
            row["accuracy_at"] = std::move(acc);
            row["auc_o"] = auc_o >= 0.0 ? json(auc_o) : json(nullptr);
            row["n_test"] = testset.items.size();
            rows.push_back(std::move(row));
        }
    }

    if (rows.empty()) {
        throw oqa::DataError("no evaluable test questions (missing labels or single-class sets)");
    }
    std::ofstream os(out);
    if (!os) throw oqa::DataError("cannot write " + out);
    os << rows.dump(2) << "\n";
    for (const auto& row : rows) {
        std::printf("%s/%s auc_b %.4f  accuracy@0.5 %.4f  n %zu\n",
                    row["category"].get<std::string>().c_str(),
                    row["standard"].get<std::string>().c_str(), row["auc_b"].get<double>(),
                    row["accuracy_at"]["0.5"].get<double>(), row["n_test"].get<std::size_t>());
    }
    std::printf("wrote metrics to %s\n", out.c_str());
    return 0;
}

int cmd_query(const std::string& cache, const std::string& model, const std::string& product_id,
              const std::string& question_text, std::size_t top_k) {
    const oqa::Corpus corpus = oqa::load_corpus_cache(cache);
    const oqa::ModelArtifact artifact = oqa::load_artifact(model);

    auto pit = corpus.product_sentence_ids.find(product_id);
    if (pit == corpus.product_sentence_ids.end() || pit->second.empty()) {
        throw oqa::DataError("unknown product '" + product_id + "' (or it has no reviews)");
    }

    oqa::QuestionRecord q;
    q.question_id = "query";
    q.product_id = product_id;
    q.text = question_text;
    q.tokens = oqa::tokenize(question_text);
    q.features = oqa::featurize(q.tokens, artifact.vocab);

    std::vector<const oqa::ExpertSentence*> sents;
    for (auto si : pit->second) sents.push_back(&corpus.sentences[si]);

    const bool binary = oqa::is_binary_question(question_text);
    const auto ranked = oqa::rank_reviews(q, sents, artifact.stats, artifact.params, top_k);
    if (binary) {
        const auto mix = oqa::predict_binary(q, sents, artifact.stats, artifact.params);
        std::printf("binary question detected; p(yes) = %.4f\n", mix.combined);
    } else {
        std::printf("open-ended question; showing relevant review sentences\n");
    }

    std::printf("\nsupporting sentences (expert vote >= 0.5):\n");
    bool any = false;
    for (const auto& r : ranked) {
        if (r.expert_pred < 0.5) continue;
        any = true;
        std::printf("  [weight %.4f, vote %.3f] %s\n", r.weight, r.expert_pred,
                    r.sentence->text.c_str());
    }
    if (!any) std::printf("  (none)\n");
    std::printf("\nopposing sentences (expert vote < 0.5):\n");
    any = false;
    for (const auto& r : ranked) {
        if (r.expert_pred >= 0.5) continue;
        any = true;
        std::printf("  [weight %.4f, vote %.3f] %s\n", r.weight, r.expert_pred,
                    r.sentence->text.c_str());
    }
    if (!any) std::printf("  (none)\n");
    return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& out_dir, oqa::SynthSpec spec,
              int labels_fixed) {
    spec.rng_seed = g.seed;
    if (labels_fixed >= 1 && labels_fixed <= 5) {
        spec.labels_per_question = {0, 0, 0, 0, 0};
        spec.labels_per_question[labels_fixed - 1] = 1.0;
    }
    const oqa::SynthResult result = oqa::generate(spec);
    oqa::write_synth_jsonl(result, out_dir);

    std::size_t ambiguous = 0;
    for (const auto& q : result.corpus.questions) {
        if (q.ambiguous) ++ambiguous;
    }
    double mean_p = 0.0;
    for (const auto& t : result.truth) mean_p += t.p_true;
    mean_p /= static_cast<double>(result.truth.size());

    std::printf("generated %zu questions, %zu sentences, vocabulary %zu\n",
                result.corpus.questions.size(), result.corpus.sentences.size(),
                result.corpus.vocab.size());
    std::printf("ambiguous questions: %.1f%% (target %.1f%%)  mean planted p: %.3f\n",
                100.0 * static_cast<double>(ambiguous) / result.corpus.questions.size(),
                100.0 * spec.target_ambiguity_rate, mean_p);
    std::printf("wrote JSONL corpus + ground_truth.jsonl under %s\n", out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"opinion question answering over product reviews"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI/TOML-style file");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "seed for every random choice")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads for objective evaluation")
        ->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "load JSONL inputs into a corpus cache");
    std::string in_products, in_questions, in_answers, in_reviews, in_out = "corpus.bin";
    std::size_t vocab_size = 5000;
    ingest->add_option("--products", in_products, "products.jsonl")->required();
    ingest->add_option("--questions", in_questions, "questions.jsonl")->required();
    ingest->add_option("--answers", in_answers, "answers.jsonl")->required();
    ingest->add_option("--reviews", in_reviews, "reviews.jsonl")->required();
    ingest->add_option("--out", in_out, "corpus cache output path")->capture_default_str();
    ingest->add_option("--vocab-size", vocab_size, "vocabulary cap")->capture_default_str();

    auto* label = app.add_subcommand("label", "detect binary questions and label their answers");
    std::string lb_cache, lb_seeds, lb_out = "labeled.bin", lb_labels;
    double keep_fraction = 0.5;
    label->add_option("--cache", lb_cache, "corpus cache from ingest")->required();
    label->add_option("--seeds", lb_seeds, "seeds.jsonl with hand-labeled answers")->required();
    label->add_option("--out", lb_out, "labeled corpus cache output")->capture_default_str();
    label->add_option("--labels-out", lb_labels, "optional labels.jsonl output");
    label->add_option("--keep-fraction", keep_fraction,
                      "most-confident fraction of labels to keep")
        ->capture_default_str();

    auto* train = app.add_subcommand("train", "fit a model variant on the training split");
    std::string tr_cache, tr_variant = "moe", tr_out = "model.json", tr_split = "train",
                tr_scope = "auto", tr_policy = "top-voted";
    oqa::TrainConfig tconfig;
    train->add_option("--cache", tr_cache, "labeled corpus cache")->required();
    train->add_option("--variant", tr_variant,
                      "moe | kl-moe | em-moe | em-moe-s | s-moe | m-moe | m-moe-s")
        ->capture_default_str();
    train->add_option("--out", tr_out, "model artifact output")->capture_default_str();
    train->add_option("--split", tr_split, "train | test | all")->capture_default_str();
    train->add_option("--scope", tr_scope, "question scope for open variants: auto | open | all")
        ->capture_default_str();
    train->add_option("--lambda", tconfig.lambda, "L2 strength")->capture_default_str();
    train->add_option("--lbfgs-iters", tconfig.lbfgs_max_iters, "L-BFGS iteration cap")
        ->capture_default_str();
    train->add_option("--lbfgs-memory", tconfig.lbfgs_memory, "L-BFGS history size")
        ->capture_default_str();
    train->add_option("--grad-tol", tconfig.lbfgs_grad_tol, "gradient stopping tolerance")
        ->capture_default_str();
    train->add_option("--em-rounds", tconfig.em_max_rounds, "EM round cap")->capture_default_str();
    train->add_option("--em-tol", tconfig.em_rel_tol, "EM relative loglik tolerance")
        ->capture_default_str();
    train->add_option("--neg-per-answer", tconfig.neg_samples_per_answer,
                      "sampled non-answers per answer (open variants)")
        ->capture_default_str();
    train->add_option("--single-label-policy", tr_policy, "top-voted | random | first")
        ->capture_default_str();
    train->add_flag("--verbose", tconfig.verbose, "log objective per iteration / round");

    auto* eval = app.add_subcommand("eval", "score a trained model on held-out questions");
    std::string ev_cache, ev_model, ev_out = "metrics.json", ev_split = "test";
    int ev_neg = 1;
    eval->add_option("--cache", ev_cache, "labeled corpus cache")->required();
    eval->add_option("--model", ev_model, "model artifact")->required();
    eval->add_option("--out", ev_out, "metrics.json output")->capture_default_str();
    eval->add_option("--split", ev_split, "test | train | all")->capture_default_str();
    eval->add_option("--neg-per-answer", ev_neg, "non-answers per answer for AUC_o")
        ->capture_default_str();

    auto* query = app.add_subcommand("query", "answer one question against a product's reviews");
    std::string qu_cache, qu_model, qu_product, qu_text;
    std::size_t top_k = 10;
    query->add_option("--cache", qu_cache, "corpus cache")->required();
    query->add_option("--model", qu_model, "model artifact")->required();
    query->add_option("--product-id", qu_product, "product to query")->required();
    query->add_option("--question", qu_text, "question text")->required();
    query->add_option("--top-k", top_k, "sentences to show")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "generate a planted-truth synthetic corpus");
    std::string sy_out = "synth";
    oqa::SynthSpec spec;
    int labels_fixed = 0;
    synth->add_option("--out-dir", sy_out, "output directory")->capture_default_str();
    synth->add_option("--questions", spec.n_questions, "number of questions")
        ->capture_default_str();
    synth->add_option("--sentences", spec.sentences_per_question, "sentences per question")
        ->capture_default_str();
    synth->add_option("--vocab", spec.vocab_size, "synthetic vocabulary size")
        ->capture_default_str();
    synth->add_option("--alpha", spec.planted_alpha, "planted sensitivity")->capture_default_str();
    synth->add_option("--beta", spec.planted_beta, "planted specificity")->capture_default_str();
    synth->add_option("--labels", labels_fixed, "fixed labels per question (1..5, default 3)");
    synth->add_option("--ambiguity-target", spec.target_ambiguity_rate,
                      "recorded ambiguity target")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*ingest) {
            return cmd_ingest(in_products, in_questions, in_answers, in_reviews, in_out,
                              vocab_size);
        }
        if (*label) return cmd_label(lb_cache, lb_seeds, lb_out, lb_labels, keep_fraction);
        if (*train) {
            if (tr_policy == "top-voted") {
                tconfig.single_label_policy = oqa::SingleLabelPolicy::TopVoted;
            } else if (tr_policy == "random") {
                tconfig.single_label_policy = oqa::SingleLabelPolicy::Random;
            } else if (tr_policy == "first") {
                tconfig.single_label_policy = oqa::SingleLabelPolicy::First;
            } else {
                throw oqa::DataError("unknown --single-label-policy '" + tr_policy + "'");
            }
            return cmd_train(g, tr_cache, tr_variant, tr_out, tconfig, tr_split, tr_scope);
        }
        if (*eval) return cmd_eval(g, ev_cache, ev_model, ev_out, ev_split, ev_neg);
        if (*query) return cmd_query(qu_cache, qu_model, qu_product, qu_text, top_k);
        if (*synth) return cmd_synth(g, sy_out, spec, labels_fixed);
    } catch (const oqa::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const oqa::NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return 0;
}
