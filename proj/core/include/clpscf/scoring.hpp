#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clpscf/checkpoint.hpp"
#include "clpscf/metrics.hpp"
#include "clpscf/training.hpp"

namespace clpscf {

// A scored test clip: the anomaly record plus the argmax-class
// diagnostic (the predicted-vs-claimed mismatch is a diagnostic only
// and never enters the metric computation).
struct ScoredClip {
    AnomalyRecord record;
    int claimed_class = -1;
    int predicted_class = -1;
};

struct ScoreOptions {
    bool with_margin = false;  // apply the training margin to the claimed class
    LoaderOptions loader;
    int batch_size = 64;
};

// Negative log softmax probability of the claimed class under the
// scaled cosine logits of the fine-tuned head (margin-free by default).
// The clip must be materialized at the model's feature sample rate.
double anomaly_score(Checkpoint& ckpt, const AudioClip& clip, int claimed_class,
                     bool with_margin = false);

// Scores every clip against its own (machine_type, machine_id) class.
// Throws when the checkpoint is not fine-tuned or a clip's machine is
// missing from the label space.
std::vector<ScoredClip> score_clips(Checkpoint& ckpt, const std::vector<AudioClip>& clips,
                                    const ScoreOptions& opts = {});

// CSV dump with header clip,machine_type,machine_id,truth,score,predicted_id.
void write_score_csv(const std::filesystem::path& path, const std::vector<ScoredClip>& scored,
                     const LabelSpace& labels);
std::vector<AnomalyRecord> read_score_csv(const std::filesystem::path& path);

// score + aggregate in one call.
EvalReport evaluate(Checkpoint& ckpt, const std::vector<AudioClip>& clips, double p,
                    const ScoreOptions& opts = {});

// One row per clip: reference, machine, truth, latent feature h.
struct LatentRow {
    std::string clip_ref;
    std::string machine_type;
    int machine_id = -1;
    bool anomalous = false;
    std::vector<double> latent;
};

std::vector<LatentRow> export_latents(Checkpoint& ckpt, const std::vector<AudioClip>& clips,
                                      const LoaderOptions& loader = {}, int batch_size = 64);
void write_latent_csv(const std::filesystem::path& path, const std::vector<LatentRow>& rows);

}  // namespace clpscf
