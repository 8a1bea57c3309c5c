#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "clpscf/dataio.hpp"
#include "clpscf/model.hpp"

namespace clpscf {

// Checkpoint container: one file holding a JSON metadata header (format
// tag, stage, model/feature config, label space, config hashes) followed
// by named little-endian f64 parameter blobs.
struct CheckpointMeta {
    Stage stage = Stage::pretrained;
    LabelSpace label_space;
    std::string training_config_hash;
    std::string run_config_hash;
    // Fine-tuning loss hyperparameters, recorded so scoring can rebuild
    // the classification logits without the training config.
    double arcface_margin = 1.0;
    double arcface_scale = 30.0;
};

struct Checkpoint {
    CheckpointMeta meta;
    std::unique_ptr<Model> model;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointMeta& meta);

// Rebuilds the model from the stored config and parameter blobs. Throws
// on unknown format tags, shape mismatches, or truncated blobs.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace clpscf
