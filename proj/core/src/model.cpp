#include "clpscf/model.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "clpscf/hash.hpp"

namespace clpscf {

const char* to_string(BackboneVariant v) {
    return v == BackboneVariant::toy_cnn ? "toy_cnn" : "stgram_mfn";
}

const char* to_string(Stage s) { return s == Stage::pretrained ? "pretrained" : "finetuned"; }

BackboneVariant backbone_from_string(const std::string& s) {
    if (s == "toy_cnn") return BackboneVariant::toy_cnn;
    if (s == "stgram_mfn") return BackboneVariant::stgram_mfn;
    throw std::invalid_argument("unknown backbone variant: " + s);
}

void ModelConfig::validate() const {
    if (embed_dim < 2) throw std::invalid_argument("ModelConfig: embed_dim must be >= 2");
    if (latent_dim < 2) throw std::invalid_argument("ModelConfig: latent_dim must be >= 2");
    if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
    if (projector_hidden < 0) throw std::invalid_argument("ModelConfig: projector_hidden must be >= 0");
    feature.validate();
}

std::string ModelConfig::hash() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "embed_dim=%d;projector_hidden=%d;latent_dim=%d;num_classes=%d;backbone=%s;feature=%s",
                  embed_dim, projector_hidden, latent_dim, num_classes, to_string(backbone),
                  feature.hash().c_str());
    return fnv1a64_hex(buf);
}

// ---------------------------------------------------------------------------
// Batch assembly

namespace {

LogMelSpec logmel_for(const AudioClip& clip, const FeatureConfig& cfg,
                      const FeatureCache* cache) {
    if (cache && !clip.source_path.empty()) {
        if (auto hit = cache->lookup(clip.source_path, cfg)) return std::move(*hit);
        LogMelSpec spec = log_mel(clip, cfg);
        cache->store(clip.source_path, cfg, spec);
        return spec;
    }
    return log_mel(clip, cfg);
}

}  // namespace

ClipBatch make_batch(const std::vector<const AudioClip*>& clips, const FeatureConfig& cfg,
                     const FeatureCache* cache, int workers) {
    if (clips.empty()) throw std::invalid_argument("make_batch: empty clip batch");
    const size_t L = clips[0]->samples.size();
    for (const auto* c : clips) {
        if (!c) throw std::invalid_argument("make_batch: null clip");
        if (c->samples.empty()) throw std::invalid_argument("make_batch: clip has no samples");
        if (c->samples.size() != L) {
            throw std::invalid_argument("make_batch: clips differ in length (" +
                                        std::to_string(c->samples.size()) + " vs " +
                                        std::to_string(L) + ")");
        }
    }
    const int N = static_cast<int>(clips.size());
    const auto [M, T] = tgram_shape_contract(L, cfg);

    ClipBatch batch;
    batch.waveforms = Tensor({N, 1, static_cast<int>(L)});
    batch.logmel = Tensor({N, M, T});

    auto fill = [&](int n) {
        const AudioClip& clip = *clips[static_cast<size_t>(n)];
        double* w = batch.waveforms.data() + batch.waveforms.idx(n, 0, 0);
        std::copy(clip.samples.begin(), clip.samples.end(), w);
        LogMelSpec spec = logmel_for(clip, cfg, cache);
        if (spec.mel_bins != M || spec.frames != T) {
            throw std::runtime_error("make_batch: feature shape mismatch");
        }
        std::copy(spec.values.begin(), spec.values.end(),
                  batch.logmel.data() + batch.logmel.idx(n, 0, 0));
    };

    if (workers <= 1 || N == 1) {
        for (int n = 0; n < N; ++n) fill(n);
    } else {
        const int nthreads = std::min(workers, N);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(nthreads));
        std::vector<std::exception_ptr> errors(static_cast<size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&, t]() {
                try {
                    for (int n = t; n < N; n += nthreads) fill(n);
                } catch (...) {
                    errors[static_cast<size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Depthwise-separable bottleneck used by the stgram_mfn trunk.

namespace {

class Bottleneck : public nn::Layer {
public:
    Bottleneck(const std::string& name, int c_in, int c_out, int expansion, int stride)
        : residual_(stride == 1 && c_in == c_out),
          expand_(name + ".expand", c_in, c_in * expansion, 1, 1, 0),
          act1_(name + ".act1", c_in * expansion),
          depthwise_(name + ".depthwise", c_in * expansion, c_in * expansion, 3, stride, 1,
                     c_in * expansion),
          act2_(name + ".act2", c_in * expansion),
          project_(name + ".project", c_in * expansion, c_out, 1, 1, 0) {}

    Tensor forward(const Tensor& x) override {
        Tensor y = project_.forward(act2_.forward(depthwise_.forward(act1_.forward(expand_.forward(x)))));
        if (residual_) {
            for (size_t i = 0; i < y.numel(); ++i) y[i] += x[i];
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor dx = expand_.backward(act1_.backward(depthwise_.backward(act2_.backward(project_.backward(grad_out)))));
        if (residual_) {
            for (size_t i = 0; i < dx.numel(); ++i) dx[i] += grad_out[i];
        }
        return dx;
    }

    void gather(std::vector<nn::Parameter*>& out) override {
        expand_.gather(out);
        act1_.gather(out);
        depthwise_.gather(out);
        act2_.gather(out);
        project_.gather(out);
    }

    void init(Rng& rng) {
        expand_.init(rng);
        depthwise_.init(rng);
        project_.init(rng);
    }

private:
    bool residual_;
    nn::Conv2d expand_;
    nn::PReLU act1_;
    nn::Conv2d depthwise_;
    nn::PReLU act2_;
    nn::Conv2d project_;
};

// Conv + PReLU pair for the stgram_mfn stem/head.
class ConvPrelu : public nn::Layer {
public:
    ConvPrelu(const std::string& name, int c_in, int c_out, int kernel, int stride, int pad)
        : conv_(name + ".conv", c_in, c_out, kernel, stride, pad), act_(name + ".act", c_out) {}

    Tensor forward(const Tensor& x) override { return act_.forward(conv_.forward(x)); }
    Tensor backward(const Tensor& g) override { return conv_.backward(act_.backward(g)); }
    void gather(std::vector<nn::Parameter*>& out) override {
        conv_.gather(out);
        act_.gather(out);
    }
    void init(Rng& rng) { conv_.init(rng); }

private:
    nn::Conv2d conv_;
    nn::PReLU act_;
};

// Conv + ReLU pair for the toy trunk.
class ConvRelu : public nn::Layer {
public:
    ConvRelu(const std::string& name, int c_in, int c_out, int kernel, int stride, int pad)
        : conv_(name + ".conv", c_in, c_out, kernel, stride, pad) {}

    Tensor forward(const Tensor& x) override { return act_.forward(conv_.forward(x)); }
    Tensor backward(const Tensor& g) override { return conv_.backward(act_.backward(g)); }
    void gather(std::vector<nn::Parameter*>& out) override { conv_.gather(out); }
    void init(Rng& rng) { conv_.init(rng); }

private:
    nn::Conv2d conv_;
    nn::ReLU act_;
};

// Conv1d + ChannelLayerNorm + LeakyReLU, shape preserving; the temporal
// refinement block of the stgram_mfn frontend.
class TgramBlock : public nn::Layer {
public:
    TgramBlock(const std::string& name, int channels)
        : conv_(name + ".conv", channels, channels, 3, 1, 1),
          norm_(name + ".norm", channels),
          act_(0.2) {}

    Tensor forward(const Tensor& x) override {
        return act_.forward(norm_.forward(conv_.forward(x)));
    }
    Tensor backward(const Tensor& g) override {
        return conv_.backward(norm_.backward(act_.backward(g)));
    }
    void gather(std::vector<nn::Parameter*>& out) override {
        conv_.gather(out);
        norm_.gather(out);
    }
    void init(Rng& rng) { conv_.init(rng); }

private:
    nn::Conv1d conv_;
    nn::ChannelLayerNorm norm_;
    nn::LeakyReLU act_;
};

template <typename T>
void init_layer(nn::Layer* layer, Rng& rng) {
    if (auto* p = dynamic_cast<T*>(layer)) p->init(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int M = cfg_.feature.mel_bins;
    const int F = cfg_.backbone_width();

    tgram_conv_ = std::make_unique<nn::Conv1d>("tgram.frontend", 1, M, cfg_.feature.n_fft,
                                               cfg_.feature.hop, 0);
    if (cfg_.backbone == BackboneVariant::stgram_mfn) {
        for (int b = 0; b < 3; ++b) {
            tgram_blocks_.push_back(
                std::make_unique<TgramBlock>("tgram.block" + std::to_string(b), M));
        }
    }

    input_norm_ = std::make_unique<nn::InstanceStandardize>();

    if (cfg_.backbone == BackboneVariant::toy_cnn) {
        trunk_.push_back(std::make_unique<ConvRelu>("trunk.conv0", 2, 16, 3, 2, 1));
        trunk_.push_back(std::make_unique<ConvRelu>("trunk.conv1", 16, 32, 3, 2, 1));
        trunk_.push_back(std::make_unique<ConvRelu>("trunk.conv2", 32, 64, 3, 2, 1));
        trunk_.push_back(std::make_unique<ConvRelu>("trunk.conv3", 64, 64, 3, 1, 1));
    } else {
        trunk_.push_back(std::make_unique<ConvPrelu>("trunk.stem", 2, 32, 3, 2, 1));
        trunk_.push_back(std::make_unique<Bottleneck>("trunk.block0", 32, 64, 2, 2));
        trunk_.push_back(std::make_unique<Bottleneck>("trunk.block1", 64, 64, 2, 1));
        trunk_.push_back(std::make_unique<Bottleneck>("trunk.block2", 64, 128, 4, 2));
        trunk_.push_back(std::make_unique<Bottleneck>("trunk.block3", 128, 128, 2, 1));
        trunk_.push_back(std::make_unique<ConvPrelu>("trunk.head", 128, 128, 1, 1, 0));
    }
    pool_ = std::make_unique<nn::GlobalAvgPool2d>();

    const int H = cfg_.projector_hidden > 0 ? cfg_.projector_hidden : F;
    proj_fc1_ = std::make_unique<nn::Linear>("projector.fc1", F, H);
    proj_act_ = std::make_unique<nn::ReLU>();
    proj_fc2_ = std::make_unique<nn::Linear>("projector.fc2", H, cfg_.embed_dim);
}

void Model::init(uint64_t seed) {
    Rng rng(mix_seed(seed, 0x6d6f64656cULL));
    tgram_conv_->init(rng);
    for (auto& b : tgram_blocks_) init_layer<TgramBlock>(b.get(), rng);
    for (auto& l : trunk_) {
        init_layer<ConvRelu>(l.get(), rng);
        init_layer<ConvPrelu>(l.get(), rng);
        init_layer<Bottleneck>(l.get(), rng);
    }
    proj_fc1_->init(rng);
    proj_fc2_->init(rng);
}

void Model::attach_classifier(uint64_t seed) {
    if (has_classifier()) throw std::logic_error("attach_classifier: classifier already present");
    Rng rng(mix_seed(seed, 0x636c617373ULL));
    classifier_fc_ = std::make_unique<nn::Linear>("classifier.fc", cfg_.embed_dim, cfg_.latent_dim);
    classifier_act_ = std::make_unique<nn::ReLU>();
    classifier_fc_->init(rng);
    arcface_weight_ = std::make_unique<nn::Parameter>(
        "arcface.weight", std::vector<int>{cfg_.num_classes, cfg_.latent_dim});
    for (size_t i = 0; i < arcface_weight_->value.numel(); ++i) {
        arcface_weight_->value[i] = rng.normal();
    }
}

Tensor Model::forward_backbone(const ClipBatch& batch) {
    const int N = batch.waveforms.dim(0);
    const int M = cfg_.feature.mel_bins;
    const int T = batch.logmel.dim(2);
    if (batch.logmel.dim(1) != M) {
        throw std::invalid_argument("forward: log-mel bin count mismatch");
    }

    Tensor tgram = tgram_conv_->forward(batch.waveforms);
    for (auto& b : tgram_blocks_) tgram = b->forward(tgram);
    if (tgram.dim(2) != T) {
        throw std::runtime_error("forward: temporal branch produced " +
                                 std::to_string(tgram.dim(2)) + " frames, expected " +
                                 std::to_string(T));
    }
    last_logmel_frames_ = T;

    Tensor stacked({N, 2, M, T});
    const size_t plane = static_cast<size_t>(M) * T;
    for (int n = 0; n < N; ++n) {
        std::copy(batch.logmel.data() + batch.logmel.idx(n, 0, 0),
                  batch.logmel.data() + batch.logmel.idx(n, 0, 0) + plane,
                  stacked.data() + stacked.idx(n, 0, 0, 0));
        std::copy(tgram.data() + tgram.idx(n, 0, 0),
                  tgram.data() + tgram.idx(n, 0, 0) + plane,
                  stacked.data() + stacked.idx(n, 1, 0, 0));
    }

    Tensor x = input_norm_->forward(stacked);
    for (auto& l : trunk_) x = l->forward(x);
    return pool_->forward(x);
}

Tensor Model::backward_backbone(const Tensor& grad_feature) {
    Tensor g = pool_->backward(grad_feature);
    for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) g = (*it)->backward(g);
    g = input_norm_->backward(g);

    // Split the stacked gradient; only the temporal channel backprops
    // further (the spectral channel is a fixed input feature).
    const int N = g.dim(0);
    const int M = g.dim(2);
    const int T = g.dim(3);
    Tensor dtgram({N, M, T});
    const size_t plane = static_cast<size_t>(M) * T;
    for (int n = 0; n < N; ++n) {
        std::copy(g.data() + g.idx(n, 1, 0, 0), g.data() + g.idx(n, 1, 0, 0) + plane,
                  dtgram.data() + dtgram.idx(n, 0, 0));
    }
    for (auto it = tgram_blocks_.rbegin(); it != tgram_blocks_.rend(); ++it) {
        dtgram = (*it)->backward(dtgram);
    }
    return tgram_conv_->backward(dtgram);
}

Tensor Model::forward_embed(const ClipBatch& batch) {
    if (!parameters_finite()) throw std::runtime_error("forward: NaN in model parameters");
    Tensor feature = forward_backbone(batch);
    return proj_fc2_->forward(proj_act_->forward(proj_fc1_->forward(feature)));
}

std::pair<Tensor, Tensor> Model::forward_latent(const ClipBatch& batch) {
    if (!has_classifier()) {
        throw std::logic_error("forward_latent: classifier head missing (pretrained-stage model)");
    }
    Tensor z = forward_embed(batch);
    Tensor h = classifier_act_->forward(classifier_fc_->forward(z));
    return {std::move(z), std::move(h)};
}

void Model::backward_from_embed(const Tensor& grad_z) {
    Tensor g = proj_fc1_->backward(proj_act_->backward(proj_fc2_->backward(grad_z)));
    backward_backbone(g);
}

void Model::backward_from_latent(const Tensor& grad_h) {
    if (!has_classifier()) throw std::logic_error("backward_from_latent: classifier head missing");
    Tensor dz = classifier_fc_->backward(classifier_act_->backward(grad_h));
    backward_from_embed(dz);
}

nn::Parameter& Model::arcface_weight() {
    if (!arcface_weight_) throw std::logic_error("arcface_weight: classifier head missing");
    return *arcface_weight_;
}

const nn::Parameter& Model::arcface_weight() const {
    if (!arcface_weight_) throw std::logic_error("arcface_weight: classifier head missing");
    return *arcface_weight_;
}

std::vector<nn::Parameter*> Model::stage1_parameters() {
    std::vector<nn::Parameter*> ps;
    tgram_conv_->gather(ps);
    for (auto& b : tgram_blocks_) b->gather(ps);
    for (auto& l : trunk_) l->gather(ps);
    proj_fc1_->gather(ps);
    proj_fc2_->gather(ps);
    return ps;
}

std::vector<nn::Parameter*> Model::parameters() {
    std::vector<nn::Parameter*> ps = stage1_parameters();
    if (classifier_fc_) classifier_fc_->gather(ps);
    if (arcface_weight_) ps.push_back(arcface_weight_.get());
    return ps;
}

std::vector<const nn::Parameter*> Model::parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

size_t Model::parameter_count() const {
    size_t n = 0;
    for (const auto* p : parameters()) n += p->value.numel();
    return n;
}

void Model::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

bool Model::parameters_finite() const {
    for (const auto* p : parameters()) {
        if (!p->value.all_finite()) return false;
    }
    return true;
}

Tensor Model::embed_clips(const std::vector<const AudioClip*>& clips,
                          const FeatureCache* cache, int workers) {
    return forward_embed(make_batch(clips, cfg_.feature, cache, workers));
}

std::pair<Tensor, Tensor> Model::latent_clips(const std::vector<const AudioClip*>& clips,
                                              const FeatureCache* cache, int workers) {
    return forward_latent(make_batch(clips, cfg_.feature, cache, workers));
}

}  // namespace clpscf
