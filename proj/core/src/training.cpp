#include "clpscf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "clpscf/hash.hpp"
#include "clpscf/losses.hpp"
#include "clpscf/sampler.hpp"

namespace clpscf {

void PretrainConfig::validate() const {
    if (per_id < 2) throw std::invalid_argument("PretrainConfig: per_id must be >= 2");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("PretrainConfig: learning_rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("PretrainConfig: epochs must be >= 0");
    if (!(tau > 0.0)) throw std::invalid_argument("PretrainConfig: tau must be > 0");
}

std::string PretrainConfig::hash() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "per_id=%d;lr=%.17g;epochs=%d;tau=%.17g;seed=%llu",
                  per_id, learning_rate, epochs, tau, static_cast<unsigned long long>(seed));
    return fnv1a64_hex(buf);
}

void FinetuneConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("FinetuneConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("FinetuneConfig: learning_rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("FinetuneConfig: epochs must be >= 0");
    if (!(margin >= 0.0) || margin >= std::numbers::pi) {
        throw std::invalid_argument("FinetuneConfig: margin must lie in [0, pi)");
    }
    if (!(scale > 0.0)) throw std::invalid_argument("FinetuneConfig: scale must be > 0");
}

std::string FinetuneConfig::hash() const {
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "batch_size=%d;lr=%.17g;epochs=%d;margin=%.17g;scale=%.17g;seed=%llu",
                  batch_size, learning_rate, epochs, margin, scale,
                  static_cast<unsigned long long>(seed));
    return fnv1a64_hex(buf);
}

double cosine_annealing_lr(int step, int total_steps, double lr_max, double lr_min) {
    if (total_steps < 1) throw std::invalid_argument("cosine_annealing_lr: total_steps must be >= 1");
    if (step < 0 || step > total_steps) {
        throw std::invalid_argument("cosine_annealing_lr: step " + std::to_string(step) +
                                    " outside [0, " + std::to_string(total_steps) + "]");
    }
    return lr_min + 0.5 * (lr_max - lr_min) *
                        (1.0 + std::cos(std::numbers::pi * step / total_steps));
}

// ---------------------------------------------------------------------------
// ClipProvider

ClipProvider::ClipProvider(std::vector<AudioClip> clips, int target_sr,
                           const LoaderOptions& opts)
    : clips_(std::move(clips)), target_sr_(target_sr) {
    if (clips_.empty()) throw std::invalid_argument("ClipProvider: no clips");
    if (target_sr_ <= 0) throw std::invalid_argument("ClipProvider: bad sample rate");
    if (!(opts.clip_seconds > 0.0)) throw std::invalid_argument("ClipProvider: clip_seconds must be > 0");
    fixed_samples_ = static_cast<size_t>(std::llround(opts.clip_seconds * target_sr_));
    preload_ = clips_.size() * fixed_samples_ <= opts.resident_sample_budget;
}

std::vector<const AudioClip*> ClipProvider::materialize(const std::vector<size_t>& indices) {
    std::vector<const AudioClip*> out;
    out.reserve(indices.size());
    if (preload_) {
        for (size_t idx : indices) {
            AudioClip& c = clips_.at(idx);
            if (c.samples.size() != fixed_samples_) {
                load_waveform(c, target_sr_, fixed_samples_);
            }
            out.push_back(&c);
        }
    } else {
        scratch_.clear();
        scratch_.reserve(indices.size());
        for (size_t idx : indices) {
            AudioClip c = clips_.at(idx);
            load_waveform(c, target_sr_, fixed_samples_);
            scratch_.push_back(std::move(c));
        }
        for (const auto& c : scratch_) out.push_back(&c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared loop helpers

namespace {

void log_step(std::ostream* os, const char* stage, int step, int epoch, double lr, double loss) {
    if (!os) return;
    nlohmann::json j{{"step", step}, {"stage", stage}, {"epoch", epoch}, {"lr", lr}, {"loss", loss}};
    *os << j.dump() << '\n';
}

std::string batch_composition(const std::vector<int>& labels, const LabelSpace& space) {
    std::map<int, int> counts;
    for (int l : labels) ++counts[l];
    std::string s;
    for (const auto& [cls, n] : counts) {
        const auto& [type, id] = space.entry(cls);
        s += type + ":" + std::to_string(id) + "x" + std::to_string(n) + " ";
    }
    return s;
}

void validate_train_clips(const std::vector<AudioClip>& clips, const LabelSpace& labels) {
    if (clips.empty()) throw std::invalid_argument("training: no clips");
    std::vector<bool> seen(static_cast<size_t>(labels.size()), false);
    for (const auto& c : clips) {
        if (c.condition != Condition::normal) {
            throw std::invalid_argument("training: non-normal clip in training set: " +
                                        c.source_path);
        }
        auto idx = labels.try_index_of(c.machine_type, c.machine_id);
        if (!idx) {
            throw std::invalid_argument("training: clip machine " + c.machine_type + ":" +
                                        std::to_string(c.machine_id) + " not in label space");
        }
        seen[static_cast<size_t>(*idx)] = true;
    }
    for (int c = 0; c < labels.size(); ++c) {
        if (!seen[static_cast<size_t>(c)]) {
            const auto& [type, id] = labels.entry(c);
            throw std::invalid_argument("training: label " + type + ":" + std::to_string(id) +
                                        " has no training clips");
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1

Checkpoint pretrain(const std::vector<AudioClip>& train_clips, const LabelSpace& labels,
                    const ModelConfig& model_cfg, const PretrainConfig& cfg,
                    const LoaderOptions& loader, const TrainHooks& hooks) {
    cfg.validate();
    validate_train_clips(train_clips, labels);

    ModelConfig mc = model_cfg;
    mc.num_classes = labels.size();
    mc.validate();

    const int C = labels.size();
    const int batch_size = C * cfg.per_id;
    const int steps_per_epoch = static_cast<int>(
        (train_clips.size() + static_cast<size_t>(batch_size) - 1) / static_cast<size_t>(batch_size));
    const int total_steps = cfg.epochs * std::max(steps_per_epoch, 1);

    Checkpoint ckpt;
    ckpt.model = std::make_unique<Model>(mc);
    ckpt.model->init(cfg.seed);
    ckpt.meta.stage = Stage::pretrained;
    ckpt.meta.label_space = labels;
    ckpt.meta.training_config_hash = cfg.hash();
    Model& model = *ckpt.model;

    std::vector<std::vector<size_t>> class_items(static_cast<size_t>(C));
    for (size_t i = 0; i < train_clips.size(); ++i) {
        const auto& c = train_clips[i];
        class_items[static_cast<size_t>(labels.index_of(c.machine_type, c.machine_id))].push_back(i);
    }

    ClipProvider provider(train_clips, mc.feature.sample_rate, loader);
    nn::Adam adam(model.stage1_parameters());
    Rng sampler_rng(mix_seed(cfg.seed, 0x70726574ULL));

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int s = 0; s < std::max(steps_per_epoch, 1); ++s, ++step) {
            const double lr = cosine_annealing_lr(step, total_steps, cfg.learning_rate, 0.0);

            auto picks = sample_per_id_batch(class_items, cfg.per_id, sampler_rng);
            std::vector<size_t> indices;
            std::vector<int> batch_labels;
            indices.reserve(picks.size());
            batch_labels.reserve(picks.size());
            for (const auto& [item, cls] : picks) {
                indices.push_back(item);
                batch_labels.push_back(cls);
            }

            auto clip_ptrs = provider.materialize(indices);
            ClipBatch batch = make_batch(clip_ptrs, mc.feature, loader.cache, loader.workers);

            model.zero_grad();
            Tensor z = model.forward_embed(batch);
            Tensor dz;
            ClMetaStats stats;
            const double loss = cl_meta_loss(z, batch_labels, cfg.tau, &dz, &stats);
            if (!std::isfinite(loss)) {
                throw std::runtime_error(
                    "pretrain: non-finite loss at step " + std::to_string(step) + " (lr=" +
                    std::to_string(lr) + ", batch: " + batch_composition(batch_labels, labels) + ")");
            }
            model.backward_from_embed(dz);
            adam.step(lr);

            log_step(hooks.step_log, "pretrain", step, epoch, lr, loss);
        }
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);
    }
    return ckpt;
}

// ---------------------------------------------------------------------------
// Stage 2

Checkpoint finetune(Checkpoint pretrained, const std::vector<AudioClip>& train_clips,
                    const FinetuneConfig& cfg, const LoaderOptions& loader,
                    const TrainHooks& hooks) {
    cfg.validate();
    if (!pretrained.model) throw std::invalid_argument("finetune: missing model");
    if (pretrained.meta.stage != Stage::pretrained || pretrained.model->has_classifier()) {
        throw std::invalid_argument("finetune: checkpoint stage must be 'pretrained'");
    }

    Checkpoint ckpt = std::move(pretrained);
    const LabelSpace& labels = ckpt.meta.label_space;
    validate_train_clips(train_clips, labels);
    if (!(LabelSpace::from_clips(train_clips) == labels)) {
        throw std::invalid_argument("finetune: clip label space does not match checkpoint (" +
                                    std::to_string(LabelSpace::from_clips(train_clips).size()) +
                                    " vs " + std::to_string(labels.size()) + " classes)");
    }

    Model& model = *ckpt.model;
    model.attach_classifier(cfg.seed);
    ckpt.meta.stage = Stage::finetuned;
    ckpt.meta.training_config_hash = cfg.hash();
    ckpt.meta.arcface_margin = cfg.margin;
    ckpt.meta.arcface_scale = cfg.scale;

    const ModelConfig& mc = model.config();
    ClipProvider provider(train_clips, mc.feature.sample_rate, loader);

    const size_t n = train_clips.size();
    const int steps_per_epoch =
        static_cast<int>((n + static_cast<size_t>(cfg.batch_size) - 1) /
                         static_cast<size_t>(cfg.batch_size));
    const int total_steps = cfg.epochs * std::max(steps_per_epoch, 1);

    nn::Adam adam(model.parameters());
    Rng shuffle_rng(mix_seed(cfg.seed, 0x66696e65ULL));

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size), ++step) {
            const double lr = cosine_annealing_lr(step, total_steps, cfg.learning_rate, 0.0);
            const size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));

            std::vector<size_t> indices(order.begin() + static_cast<long>(start),
                                        order.begin() + static_cast<long>(end));
            std::vector<int> batch_labels;
            batch_labels.reserve(indices.size());
            for (size_t idx : indices) {
                const auto& c = provider.meta(idx);
                batch_labels.push_back(labels.index_of(c.machine_type, c.machine_id));
            }

            auto clip_ptrs = provider.materialize(indices);
            ClipBatch batch = make_batch(clip_ptrs, mc.feature, loader.cache, loader.workers);

            model.zero_grad();
            auto [z, h] = model.forward_latent(batch);

            ArcFaceParams af;
            af.weight = model.arcface_weight().value;
            af.margin = cfg.margin;
            af.scale = cfg.scale;
            Tensor dh, dw;
            const double loss = arcface_loss(h, batch_labels, af, &dh, &dw);
            if (!std::isfinite(loss)) {
                throw std::runtime_error(
                    "finetune: non-finite loss at step " + std::to_string(step) + " (lr=" +
                    std::to_string(lr) + ", batch: " + batch_composition(batch_labels, labels) + ")");
            }
            model.backward_from_latent(dh);
            for (size_t i = 0; i < dw.numel(); ++i) model.arcface_weight().grad[i] += dw[i];
            adam.step(lr);

            log_step(hooks.step_log, "finetune", step, epoch, lr, loss);
        }
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);
    }
    return ckpt;
}

}  // namespace clpscf
