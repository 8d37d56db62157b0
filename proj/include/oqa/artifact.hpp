#ifndef OQA_ARTIFACT_HPP
#define OQA_ARTIFACT_HPP

#include <map>
#include <string>

#include "oqa/corpus.hpp"
#include "oqa/moe.hpp"
#include "oqa/train.hpp"

namespace oqa {

// Self-contained trained model: vocabulary and stats ride along so the
// artifact predicts without the original corpus. Serialization is canonical
// (sorted keys, fixed field set), so load followed by save is byte-identical.
struct ModelArtifact {
    int format_version = 1;
    Variant variant = Variant::MoE;
    Vocabulary vocab;
    CorpusStats stats;
    ModelParams params;
    TrainConfig config;                    // training-run snapshot
    std::map<std::string, double> metrics; // final objective, rounds, timings
};

void save_artifact(const ModelArtifact& artifact, const std::string& path);
ModelArtifact load_artifact(const std::string& path); // refuses version mismatches

// Binary corpus cache; rewriting unchanged inputs reproduces identical bytes.
void save_corpus_cache(const Corpus& corpus, const std::string& path);
Corpus load_corpus_cache(const std::string& path);

} // namespace oqa

#endif // OQA_ARTIFACT_HPP
