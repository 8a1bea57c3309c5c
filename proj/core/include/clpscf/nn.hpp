#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clpscf/rng.hpp"
#include "clpscf/tensor.hpp"

namespace clpscf::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}

    void zero_grad() { grad.fill(0.0); }
};

// Layers own their parameters and cache whatever forward state backward
// needs. backward() accumulates into parameter grads and returns the
// gradient w.r.t. the layer input.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void gather(std::vector<Parameter*>& /*out*/) {}
    void zero_grad() {
        std::vector<Parameter*> ps;
        gather(ps);
        for (auto* p : ps) p->zero_grad();
    }
};

// y = x W^T + b, x: (N, in), W: (out, in).
class Linear : public Layer {
public:
    Linear(std::string name, int in, int out);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void gather(std::vector<Parameter*>& out) override;
    void init(Rng& rng);

    Parameter weight, bias;

private:
    int in_, out_;
    Tensor x_;
};

// x: (N, C_in, L) -> (N, C_out, L_out), no padding option needed beyond
// symmetric zero padding.
class Conv1d : public Layer {
public:
    Conv1d(std::string name, int c_in, int c_out, int kernel, int stride, int pad);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void gather(std::vector<Parameter*>& out) override;
    void init(Rng& rng);

    static int out_len(int in_len, int kernel, int stride, int pad) {
        return (in_len + 2 * pad - kernel) / stride + 1;
    }

    Parameter weight, bias;  // weight: (c_out, c_in, k)

private:
    int c_in_, c_out_, k_, stride_, pad_;
    Tensor x_;
};

// x: (N, C_in, H, W) -> (N, C_out, H_out, W_out). groups == c_in == c_out
// gives a depthwise convolution.
class Conv2d : public Layer {
public:
    Conv2d(std::string name, int c_in, int c_out, int kernel, int stride, int pad,
           int groups = 1);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void gather(std::vector<Parameter*>& out) override;
    void init(Rng& rng);

    static int out_len(int in_len, int kernel, int stride, int pad) {
        return (in_len + 2 * pad - kernel) / stride + 1;
    }

    Parameter weight, bias;  // weight: (c_out, c_in/groups, k, k)

private:
    int c_in_, c_out_, k_, stride_, pad_, groups_;
    Tensor x_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    Tensor x_;
};

class LeakyReLU : public Layer {
public:
    explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    double slope_;
    Tensor x_;
};

// PReLU with one learnable slope per channel (axis 1).
class PReLU : public Layer {
public:
    PReLU(std::string name, int channels, double init_slope = 0.25);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void gather(std::vector<Parameter*>& out) override;

    Parameter slope;

private:
    int channels_;
    Tensor x_;
};

// Layer norm across the channel axis of (N, C, L) at every (n, l), with
// per-channel gain and bias.
class ChannelLayerNorm : public Layer {
public:
    ChannelLayerNorm(std::string name, int channels, double eps = 1e-5);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void gather(std::vector<Parameter*>& out) override;

    Parameter gain, bias;

private:
    int channels_;
    double eps_;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

// Parameter-free per-(sample, channel) standardization over the spatial
// extent of (N, C, H, W). Used to put the stacked input channels on a
// common scale; gradients flow through it into the learned temporal
// frontend.
class InstanceStandardize : public Layer {
public:
    explicit InstanceStandardize(double eps = 1e-6) : eps_(eps) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    double eps_;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

// (N, C, H, W) -> (N, C).
class GlobalAvgPool2d : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> in_shape_;
};

// Adam with cosine-annealed step size supplied by the caller.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(double lr);
    void zero_grad();

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

// Kaiming-style fan-in init used by the conv/linear layers.
void init_kaiming(Tensor& w, int fan_in, Rng& rng);

}  // namespace clpscf::nn
