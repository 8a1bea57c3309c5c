#pragma once

#include <filesystem>
#include <string>

#include "clpscf/features.hpp"
#include "clpscf/model.hpp"
#include "clpscf/training.hpp"

namespace clpscf {

// Merged view of every stage's configuration. File format is flat
// key = value lines under [section] headers; command-line flags override
// file values. The canonical serialization (and its hash) is embedded
// in every artifact for provenance.
struct RunConfig {
    // [data]
    double clip_seconds = 10.0;
    int workers = 1;

    // [features]
    FeatureConfig feature;

    // [model]
    int embed_dim = 128;
    int projector_hidden = 0;
    int latent_dim = 128;
    std::string backbone = "stgram_mfn";

    // [pretrain] / [finetune]
    PretrainConfig pretrain;
    FinetuneConfig finetune;

    // [eval]
    double eval_p = 0.1;
    double tsne_perplexity = 30.0;

    static RunConfig from_file(const std::filesystem::path& path);
    void apply(const std::string& section, const std::string& key, const std::string& value);
    void validate() const;

    std::string to_ini() const;  // canonical, deterministic serialization
    std::string hash() const;    // FNV-1a of the canonical serialization

    ModelConfig model_config(int num_classes) const;
    LoaderOptions loader_options(const FeatureCache* cache = nullptr) const;
};

}  // namespace clpscf
