#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "clpscf/checkpoint.hpp"
#include "clpscf/dataio.hpp"
#include "clpscf/feature_cache.hpp"
#include "clpscf/model.hpp"

namespace clpscf {

struct PretrainConfig {
    int per_id = 6;                 // clips per machine ID per batch
    double learning_rate = 0.0005;
    int epochs = 100;
    double tau = 0.05;
    uint64_t seed = 0;

    void validate() const;
    std::string hash() const;
};

struct FinetuneConfig {
    int batch_size = 128;
    double learning_rate = 0.0001;
    int epochs = 300;
    double margin = 1.0;   // radians
    double scale = 30.0;
    uint64_t seed = 0;

    void validate() const;
    std::string hash() const;
};

// Single-cycle cosine annealing:
//   lr(step) = lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi step / total)).
double cosine_annealing_lr(int step, int total_steps, double lr_max, double lr_min);

// Waveform materialization policy shared by training and scoring.
struct LoaderOptions {
    double clip_seconds = 10.0;  // fixed duration; clips truncated / zero-padded
    int workers = 1;             // feature-extraction threads (never changes results)
    const FeatureCache* cache = nullptr;
    // Datasets whose resident waveforms would exceed this stay on disk
    // and are decoded per batch.
    size_t resident_sample_budget = 192u << 20;
};

// Materializes clip waveforms at a fixed rate and duration, either
// keeping them resident (small datasets) or decoding per batch.
class ClipProvider {
public:
    ClipProvider(std::vector<AudioClip> clips, int target_sr, const LoaderOptions& opts);

    size_t size() const { return clips_.size(); }
    const AudioClip& meta(size_t idx) const { return clips_[idx]; }
    size_t fixed_samples() const { return fixed_samples_; }

    // Pointers stay valid until the next materialize() call.
    std::vector<const AudioClip*> materialize(const std::vector<size_t>& indices);

private:
    std::vector<AudioClip> clips_;
    std::vector<AudioClip> scratch_;
    int target_sr_;
    size_t fixed_samples_;
    bool preload_;
};

struct TrainHooks {
    std::ostream* step_log = nullptr;  // line-delimited JSON, one line per step
    std::function<void(int epoch, Model&)> on_epoch_end;
};

// Stage 1: machine-ID contrastive pretraining over class-balanced
// batches of size C * per_id. Deterministic for a fixed seed. Requires
// every label-space entry to occur in the clips and all clips normal.
Checkpoint pretrain(const std::vector<AudioClip>& train_clips, const LabelSpace& labels,
                    const ModelConfig& model_cfg, const PretrainConfig& cfg,
                    const LoaderOptions& loader = {}, const TrainHooks& hooks = {});

// Stage 2: attaches the classifier head and fine-tunes every parameter
// with the angular-margin classification loss over uniformly shuffled
// batches. The input checkpoint must be stage `pretrained` with a label
// space matching the clips.
Checkpoint finetune(Checkpoint pretrained, const std::vector<AudioClip>& train_clips,
                    const FinetuneConfig& cfg, const LoaderOptions& loader = {},
                    const TrainHooks& hooks = {});

}  // namespace clpscf
