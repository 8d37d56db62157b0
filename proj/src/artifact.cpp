#include "oqa/artifact.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace oqa {

using nlohmann::json;

namespace {

constexpr int kArtifactVersion = 1;

json params_to_json(const ModelParams& p) {
    json j;
    j["variant"] = variant_name(p.variant);
    j["lambda"] = p.lambda;
    j["vocab_size"] = p.vocab_size;
    j["kappa"] = p.kappa;
    j["eta"] = p.eta;
    j["mu"] = p.mu;
    j["xi"] = p.xi;
    j["gamma1"] = p.gamma1;
    j["gamma2"] = p.gamma2;
    j["g"] = p.g;
    j["c"] = p.c;
    j["expertise"] = p.expertise; // std::map: keys serialize sorted
    j["bias"] = p.bias;
    return j;
}

ModelParams params_from_json(const json& j) {
    ModelParams p;
    p.variant = variant_from_name(j.at("variant").get<std::string>());
    p.lambda = j.at("lambda").get<double>();
    p.vocab_size = j.at("vocab_size").get<std::size_t>();
    p.kappa = j.at("kappa").get<std::array<double, 2>>();
    p.eta = j.at("eta").get<std::vector<double>>();
    p.mu = j.at("mu").get<std::vector<double>>();
    p.xi = j.at("xi").get<std::vector<double>>();
    p.gamma1 = j.at("gamma1").get<std::vector<double>>();
    p.gamma2 = j.at("gamma2").get<std::vector<double>>();
    p.g = j.at("g").get<std::array<double, 2>>();
    p.c = j.at("c").get<double>();
    p.expertise = j.at("expertise").get<std::map<std::string, double>>();
    p.bias = j.at("bias").get<std::map<std::string, double>>();
    return p;
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["variant"] = variant_name(c.variant);
    j["lambda"] = c.lambda;
    j["lbfgs_memory"] = c.lbfgs_memory;
    j["lbfgs_max_iters"] = c.lbfgs_max_iters;
    j["lbfgs_grad_tol"] = c.lbfgs_grad_tol;
    j["em_max_rounds"] = c.em_max_rounds;
    j["em_rel_tol"] = c.em_rel_tol;
    j["neg_samples_per_answer"] = c.neg_samples_per_answer;
    j["rng_seed"] = c.rng_seed;
    j["threads"] = c.threads;
    switch (c.single_label_policy) {
        case SingleLabelPolicy::TopVoted: j["single_label_policy"] = "top-voted"; break;
        case SingleLabelPolicy::Random: j["single_label_policy"] = "random"; break;
        case SingleLabelPolicy::First: j["single_label_policy"] = "first"; break;
    }
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.lambda = j.at("lambda").get<double>();
    c.lbfgs_memory = j.at("lbfgs_memory").get<int>();
    c.lbfgs_max_iters = j.at("lbfgs_max_iters").get<int>();
    c.lbfgs_grad_tol = j.at("lbfgs_grad_tol").get<double>();
    c.em_max_rounds = j.at("em_max_rounds").get<int>();
    c.em_rel_tol = j.at("em_rel_tol").get<double>();
    c.neg_samples_per_answer = j.at("neg_samples_per_answer").get<int>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<int>();
    const std::string policy = j.at("single_label_policy").get<std::string>();
    if (policy == "top-voted") c.single_label_policy = SingleLabelPolicy::TopVoted;
    else if (policy == "random") c.single_label_policy = SingleLabelPolicy::Random;
    else if (policy == "first") c.single_label_policy = SingleLabelPolicy::First;
    else throw DataError("unknown single_label_policy '" + policy + "'");
    return c;
}

} // namespace

void save_artifact(const ModelArtifact& artifact, const std::string& path) {
    json j;
    j["format_version"] = kArtifactVersion;
    j["variant"] = variant_name(artifact.variant);

    json vocab;
    vocab["tokens"] = artifact.vocab.index_to_token;
    vocab["doc_freq"] = artifact.vocab.doc_freq;
    j["vocabulary"] = std::move(vocab);

    json stats;
    stats["total_sentences"] = artifact.stats.total_sentences;
    stats["avg_sentence_len"] = artifact.stats.avg_sentence_len;
    std::map<std::string, std::uint32_t> df_sorted(artifact.stats.doc_freq.begin(),
                                                   artifact.stats.doc_freq.end());
    stats["doc_freq"] = std::move(df_sorted);
    j["corpus_stats"] = std::move(stats);

    j["model_params"] = params_to_json(artifact.params);
    j["train_config"] = config_to_json(artifact.config);
    j["metrics"] = artifact.metrics;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

ModelArtifact load_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError(path + ": malformed artifact: " + e.what());
    }

    ModelArtifact artifact;
    artifact.format_version = j.at("format_version").get<int>();
    if (artifact.format_version != kArtifactVersion) {
        throw DataError(path + ": artifact format_version " +
                        std::to_string(artifact.format_version) + " unsupported (expected " +
                        std::to_string(kArtifactVersion) + ")");
    }
    artifact.variant = variant_from_name(j.at("variant").get<std::string>());

    const auto& vocab = j.at("vocabulary");
    artifact.vocab.index_to_token = vocab.at("tokens").get<std::vector<std::string>>();
    artifact.vocab.doc_freq = vocab.at("doc_freq").get<std::vector<std::uint32_t>>();
    for (std::uint32_t i = 0; i < artifact.vocab.index_to_token.size(); ++i) {
        artifact.vocab.token_to_index.emplace(artifact.vocab.index_to_token[i], i);
    }

    const auto& stats = j.at("corpus_stats");
    artifact.stats.total_sentences = stats.at("total_sentences").get<std::uint64_t>();
    artifact.stats.avg_sentence_len = stats.at("avg_sentence_len").get<double>();
    for (const auto& [token, n] :
         stats.at("doc_freq").get<std::map<std::string, std::uint32_t>>()) {
        artifact.stats.doc_freq.emplace(token, n);
    }

    artifact.params = params_from_json(j.at("model_params"));
    artifact.config = config_from_json(j.at("train_config"));
    artifact.metrics = j.at("metrics").get<std::map<std::string, double>>();
    return artifact;
}

// ---------------------------------------------------------------------------
// binary corpus cache

namespace {

constexpr char kCacheMagic[4] = {'O', 'Q', 'A', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot write " + path);
    }
    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void tokens(const std::vector<std::string>& ts) {
        u32(static_cast<std::uint32_t>(ts.size()));
        for (const auto& t : ts) str(t);
    }
    void features(const FeatureVector& f) {
        u32(static_cast<std::uint32_t>(f.indices.size()));
        for (std::size_t i = 0; i < f.indices.size(); ++i) {
            u32(f.indices[i]);
            f64(f.weights[i]);
        }
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw DataError("cannot open " + path);
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw DataError(path_ + ": truncated corpus cache");
        }
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        bytes(&v, 4);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        if (n > 0) bytes(s.data(), n);
        return s;
    }
    std::vector<std::string> tokens() {
        const std::uint32_t n = u32();
        std::vector<std::string> ts;
        ts.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) ts.push_back(str());
        return ts;
    }
    FeatureVector features() {
        const std::uint32_t n = u32();
        FeatureVector f;
        f.indices.reserve(n);
        f.weights.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            f.indices.push_back(u32());
            f.weights.push_back(f64());
        }
        return f;
    }

private:
    std::ifstream in_;
    std::string path_;
};

} // namespace

void save_corpus_cache(const Corpus& corpus, const std::string& path) {
    Writer w(path);
    w.bytes(kCacheMagic, 4);
    w.u32(kCacheVersion);

    w.u64(corpus.products.size());
    for (const auto& p : corpus.products) {
        w.str(p.product_id);
        w.str(p.category);
    }

    w.u64(corpus.sentences.size());
    for (const auto& s : corpus.sentences) {
        w.str(s.sentence_id);
        w.str(s.review_id);
        w.str(s.product_id);
        w.str(s.reviewer_id);
        w.str(s.text);
        w.tokens(s.tokens);
        w.features(s.features);
        w.i32(s.rating);
        w.f64(s.h1);
        w.f64(s.h2);
    }

    w.u64(corpus.questions.size());
    for (const auto& q : corpus.questions) {
        w.str(q.question_id);
        w.str(q.product_id);
        w.str(q.asker_id);
        w.str(q.text);
        w.tokens(q.tokens);
        w.features(q.features);
        w.i32(static_cast<std::int32_t>(q.qtype));
        w.i32(q.n_pos);
        w.i32(q.n_neg);
        w.i32(q.n_total);
        w.i32(q.ambiguous ? 1 : 0);
        w.u64(q.answers.size());
        for (const auto& a : q.answers) {
            w.str(a.answer_id);
            w.str(a.text);
            w.tokens(a.tokens);
            w.features(a.features);
            w.i32(a.top_voted ? 1 : 0);
            w.i32(a.label);
            w.f64(a.label_confidence);
        }
    }

    w.u64(corpus.vocab.size());
    for (std::size_t i = 0; i < corpus.vocab.size(); ++i) {
        w.str(corpus.vocab.index_to_token[i]);
        w.u32(corpus.vocab.doc_freq[i]);
    }

    w.u64(corpus.stats.total_sentences);
    w.f64(corpus.stats.avg_sentence_len);
    std::map<std::string, std::uint32_t> df_sorted(corpus.stats.doc_freq.begin(),
                                                   corpus.stats.doc_freq.end());
    w.u64(df_sorted.size());
    for (const auto& [token, n] : df_sorted) {
        w.str(token);
        w.u32(n);
    }

    w.u64(corpus.report.dropped_questions);
    w.u64(corpus.report.dropped_answers);
    w.u64(corpus.report.dropped_reviews);
}

Corpus load_corpus_cache(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kCacheMagic, 4) != 0) {
        throw DataError(path + ": not a corpus cache");
    }
    const std::uint32_t version = r.u32();
    if (version != kCacheVersion) {
        throw DataError(path + ": corpus cache version " + std::to_string(version) +
                        " unsupported");
    }

    Corpus corpus;
    const std::uint64_t n_products = r.u64();
    corpus.products.reserve(n_products);
    for (std::uint64_t i = 0; i < n_products; ++i) {
        Product p;
        p.product_id = r.str();
        p.category = r.str();
        corpus.products.push_back(std::move(p));
    }

    const std::uint64_t n_sentences = r.u64();
    corpus.sentences.reserve(n_sentences);
    for (std::uint64_t i = 0; i < n_sentences; ++i) {
        ExpertSentence s;
        s.sentence_id = r.str();
        s.review_id = r.str();
        s.product_id = r.str();
        s.reviewer_id = r.str();
        s.text = r.str();
        s.tokens = r.tokens();
        s.features = r.features();
        s.rating = r.i32();
        s.h1 = r.f64();
        s.h2 = r.f64();
        corpus.sentences.push_back(std::move(s));
    }

    const std::uint64_t n_questions = r.u64();
    corpus.questions.reserve(n_questions);
    for (std::uint64_t i = 0; i < n_questions; ++i) {
        QuestionRecord q;
        q.question_id = r.str();
        q.product_id = r.str();
        q.asker_id = r.str();
        q.text = r.str();
        q.tokens = r.tokens();
        q.features = r.features();
        q.qtype = static_cast<QuestionType>(r.i32());
        q.n_pos = r.i32();
        q.n_neg = r.i32();
        q.n_total = r.i32();
        q.ambiguous = r.i32() != 0;
        const std::uint64_t n_answers = r.u64();
        q.answers.reserve(n_answers);
        for (std::uint64_t k = 0; k < n_answers; ++k) {
            AnswerRecord a;
            a.answer_id = r.str();
            a.text = r.str();
            a.tokens = r.tokens();
            a.features = r.features();
            a.top_voted = r.i32() != 0;
            a.label = r.i32();
            a.label_confidence = r.f64();
            q.answers.push_back(std::move(a));
        }
        corpus.questions.push_back(std::move(q));
    }

    const std::uint64_t vocab_size = r.u64();
    for (std::uint64_t i = 0; i < vocab_size; ++i) {
        const std::string token = r.str();
        corpus.vocab.token_to_index.emplace(token, static_cast<std::uint32_t>(i));
        corpus.vocab.index_to_token.push_back(token);
        corpus.vocab.doc_freq.push_back(r.u32());
    }

    corpus.stats.total_sentences = r.u64();
    corpus.stats.avg_sentence_len = r.f64();
    const std::uint64_t df_size = r.u64();
    for (std::uint64_t i = 0; i < df_size; ++i) {
        const std::string token = r.str();
        corpus.stats.doc_freq.emplace(token, r.u32());
    }

    corpus.report.dropped_questions = r.u64();
    corpus.report.dropped_answers = r.u64();
    corpus.report.dropped_reviews = r.u64();

    for (std::uint32_t i = 0; i < corpus.products.size(); ++i) {
        corpus.product_index.emplace(corpus.products[i].product_id, i);
    }
    for (std::uint32_t i = 0; i < corpus.sentences.size(); ++i) {
        corpus.product_sentence_ids[corpus.sentences[i].product_id].push_back(i);
    }
    return corpus;
}

} // namespace oqa
