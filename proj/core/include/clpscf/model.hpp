#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "clpscf/dataio.hpp"
#include "clpscf/feature_cache.hpp"
#include "clpscf/features.hpp"
#include "clpscf/nn.hpp"
#include "clpscf/tensor.hpp"

namespace clpscf {

enum class BackboneVariant { stgram_mfn, toy_cnn };
enum class Stage { pretrained, finetuned };

const char* to_string(BackboneVariant v);
const char* to_string(Stage s);
BackboneVariant backbone_from_string(const std::string& s);

struct ModelConfig {
    int embed_dim = 128;       // contrastive embedding width D
    int projector_hidden = 0;  // 0 -> backbone feature width
    int latent_dim = 128;      // classifier latent width
    int num_classes = 2;
    BackboneVariant backbone = BackboneVariant::stgram_mfn;
    FeatureConfig feature;

    void validate() const;
    std::string hash() const;
    int backbone_width() const {
        return backbone == BackboneVariant::toy_cnn ? 64 : 128;
    }
};

// Waveform batch (N, 1, L) plus matching log-mel batch (N, M, T).
struct ClipBatch {
    Tensor waveforms;
    Tensor logmel;
    int batch_size() const { return waveforms.dim(0); }
};

// Builds the model input tensors for a batch of materialized clips.
// All clips must share one length. Feature extraction is pure per clip,
// so the optional worker parallelism cannot change results.
ClipBatch make_batch(const std::vector<const AudioClip*>& clips, const FeatureConfig& cfg,
                     const FeatureCache* cache = nullptr, int workers = 1);

// Two-stage embedding model:
//   waveform -> learned temporal frontend -> (M, T) map
//   stacked with the log-mel map into 2 channels -> CNN trunk -> feature
//   -> MLP projector -> embedding z              (both stages)
//   z -> classifier trunk -> latent h -> angular-margin class weights
//                                                (fine-tuned stage only)
//
// Every layer is per-sample and deterministic, so repeated forward
// passes agree bit-exactly and batch composition cannot leak between
// rows.
class Model {
public:
    explicit Model(ModelConfig cfg);

    // Deterministic stage-1 initialization (backbone + projector).
    void init(uint64_t seed);
    // Adds classifier trunk + class weight matrix with fresh init.
    void attach_classifier(uint64_t seed);
    bool has_classifier() const { return classifier_fc_ != nullptr; }
    Stage stage() const {
        return has_classifier() ? Stage::finetuned : Stage::pretrained;
    }

    const ModelConfig& config() const { return cfg_; }

    // Forward to embeddings z (N x D). Throws on NaN parameters.
    Tensor forward_embed(const ClipBatch& batch);
    // Forward to (z, h). Throws when the classifier head is missing.
    std::pair<Tensor, Tensor> forward_latent(const ClipBatch& batch);

    // Backprop entry points matching the two forward paths. Parameter
    // gradients accumulate; call zero_grad() between steps.
    void backward_from_embed(const Tensor& grad_z);
    void backward_from_latent(const Tensor& grad_h);

    nn::Parameter& arcface_weight();
    const nn::Parameter& arcface_weight() const;

    // Parameters in a stable registration order. Stage-1 parameters
    // always come first; classifier/arcface groups follow when present.
    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    std::vector<nn::Parameter*> stage1_parameters();
    size_t parameter_count() const;

    void zero_grad();
    bool parameters_finite() const;

    // Convenience wrappers over make_batch + forward.
    Tensor embed_clips(const std::vector<const AudioClip*>& clips,
                       const FeatureCache* cache = nullptr, int workers = 1);
    std::pair<Tensor, Tensor> latent_clips(const std::vector<const AudioClip*>& clips,
                                           const FeatureCache* cache = nullptr,
                                           int workers = 1);

private:
    Tensor forward_backbone(const ClipBatch& batch);
    Tensor backward_backbone(const Tensor& grad_feature);

    ModelConfig cfg_;

    // Temporal frontend.
    std::unique_ptr<nn::Conv1d> tgram_conv_;
    std::vector<std::unique_ptr<nn::Layer>> tgram_blocks_;  // stgram_mfn only

    std::unique_ptr<nn::InstanceStandardize> input_norm_;
    std::vector<std::unique_ptr<nn::Layer>> trunk_;
    std::unique_ptr<nn::GlobalAvgPool2d> pool_;

    std::unique_ptr<nn::Linear> proj_fc1_;
    std::unique_ptr<nn::ReLU> proj_act_;
    std::unique_ptr<nn::Linear> proj_fc2_;

    std::unique_ptr<nn::Linear> classifier_fc_;
    std::unique_ptr<nn::ReLU> classifier_act_;
    std::unique_ptr<nn::Parameter> arcface_weight_;

    int last_logmel_frames_ = 0;
};

}  // namespace clpscf
