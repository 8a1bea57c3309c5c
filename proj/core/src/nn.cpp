#include "clpscf/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace clpscf::nn {

void init_kaiming(Tensor& w, int fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, std);
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::string name, int in, int out)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out) {}

void Linear::init(Rng& rng) {
    init_kaiming(weight.value, in_, rng);
    bias.value.fill(0.0);
}

Tensor Linear::forward(const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != in_) {
        throw std::invalid_argument("Linear: bad input shape " + x.shape_str());
    }
    x_ = x;
    const int N = x.dim(0);
    Tensor y({N, out_});
    for (int n = 0; n < N; ++n) {
        const double* xr = x.data() + x.idx(n, 0);
        double* yr = y.data() + y.idx(n, 0);
        for (int o = 0; o < out_; ++o) {
            const double* wr = weight.value.data() + weight.value.idx(o, 0);
            double acc = bias.value[static_cast<size_t>(o)];
            for (int i = 0; i < in_; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const int N = x_.dim(0);
    Tensor dx({N, in_});
    for (int n = 0; n < N; ++n) {
        const double* xr = x_.data() + x_.idx(n, 0);
        const double* gr = grad_out.data() + grad_out.idx(n, 0);
        double* dxr = dx.data() + dx.idx(n, 0);
        for (int o = 0; o < out_; ++o) {
            const double g = gr[o];
            bias.grad[static_cast<size_t>(o)] += g;
            double* dwr = weight.grad.data() + weight.grad.idx(o, 0);
            const double* wr = weight.value.data() + weight.value.idx(o, 0);
            for (int i = 0; i < in_; ++i) {
                dwr[i] += g * xr[i];
                dxr[i] += g * wr[i];
            }
        }
    }
    return dx;
}

void Linear::gather(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(std::string name, int c_in, int c_out, int kernel, int stride, int pad)
    : weight(name + ".weight", {c_out, c_in, kernel}),
      bias(name + ".bias", {c_out}),
      c_in_(c_in), c_out_(c_out), k_(kernel), stride_(stride), pad_(pad) {}

void Conv1d::init(Rng& rng) {
    init_kaiming(weight.value, c_in_ * k_, rng);
    bias.value.fill(0.0);
}

Tensor Conv1d::forward(const Tensor& x) {
    if (x.rank() != 3 || x.dim(1) != c_in_) {
        throw std::invalid_argument("Conv1d: bad input shape " + x.shape_str());
    }
    x_ = x;
    const int N = x.dim(0), L = x.dim(2);
    const int Lo = out_len(L, k_, stride_, pad_);
    if (Lo <= 0) throw std::invalid_argument("Conv1d: input too short");
    Tensor y({N, c_out_, Lo});
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < c_out_; ++co) {
            double* yr = y.data() + y.idx(n, co, 0);
            const double b = bias.value[static_cast<size_t>(co)];
            for (int t = 0; t < Lo; ++t) {
                const int start = t * stride_ - pad_;
                double acc = b;
                for (int ci = 0; ci < c_in_; ++ci) {
                    const double* xr = x.data() + x.idx(n, ci, 0);
                    const double* wr = weight.value.data() + weight.value.idx(co, ci, 0);
                    const int j0 = start < 0 ? -start : 0;
                    const int j1 = std::min(k_, L - start);
                    for (int j = j0; j < j1; ++j) acc += wr[j] * xr[start + j];
                }
                yr[t] = acc;
            }
        }
    }
    return y;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
    const int N = x_.dim(0), L = x_.dim(2);
    const int Lo = grad_out.dim(2);
    Tensor dx({N, c_in_, L});
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < c_out_; ++co) {
            const double* gr = grad_out.data() + grad_out.idx(n, co, 0);
            for (int t = 0; t < Lo; ++t) {
                const double g = gr[t];
                if (g == 0.0) continue;
                bias.grad[static_cast<size_t>(co)] += g;
                const int start = t * stride_ - pad_;
                for (int ci = 0; ci < c_in_; ++ci) {
                    const double* xr = x_.data() + x_.idx(n, ci, 0);
                    double* dxr = dx.data() + dx.idx(n, ci, 0);
                    double* dwr = weight.grad.data() + weight.grad.idx(co, ci, 0);
                    const double* wr = weight.value.data() + weight.value.idx(co, ci, 0);
                    const int j0 = start < 0 ? -start : 0;
                    const int j1 = std::min(k_, L - start);
                    for (int j = j0; j < j1; ++j) {
                        dwr[j] += g * xr[start + j];
                        dxr[start + j] += g * wr[j];
                    }
                }
            }
        }
    }
    return dx;
}

void Conv1d::gather(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int c_in, int c_out, int kernel, int stride, int pad,
               int groups)
    : weight(name + ".weight", {c_out, c_in / groups, kernel, kernel}),
      bias(name + ".bias", {c_out}),
      c_in_(c_in), c_out_(c_out), k_(kernel), stride_(stride), pad_(pad), groups_(groups) {
    if (c_in % groups != 0 || c_out % groups != 0) {
        throw std::invalid_argument("Conv2d: channels must be divisible by groups");
    }
}

void Conv2d::init(Rng& rng) {
    init_kaiming(weight.value, (c_in_ / groups_) * k_ * k_, rng);
    bias.value.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.rank() != 4 || x.dim(1) != c_in_) {
        throw std::invalid_argument("Conv2d: bad input shape " + x.shape_str());
    }
    x_ = x;
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int Ho = out_len(H, k_, stride_, pad_);
    const int Wo = out_len(W, k_, stride_, pad_);
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("Conv2d: input too small");
    const int cig = c_in_ / groups_;
    const int cog = c_out_ / groups_;

    Tensor y({N, c_out_, Ho, Wo});
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < c_out_; ++co) {
            const int g = co / cog;
            const double b = bias.value[static_cast<size_t>(co)];
            for (int oh = 0; oh < Ho; ++oh) {
                const int h0 = oh * stride_ - pad_;
                double* yr = y.data() + y.idx(n, co, oh, 0);
                for (int ow = 0; ow < Wo; ++ow) {
                    const int w0 = ow * stride_ - pad_;
                    double acc = b;
                    for (int ci = 0; ci < cig; ++ci) {
                        const double* xc = x.data() + x.idx(n, g * cig + ci, 0, 0);
                        const double* wc = weight.value.data() + weight.value.idx(co, ci, 0, 0);
                        for (int kh = 0; kh < k_; ++kh) {
                            const int hin = h0 + kh;
                            if (hin < 0 || hin >= H) continue;
                            const double* xrow = xc + static_cast<size_t>(hin) * W;
                            const double* wrow = wc + static_cast<size_t>(kh) * k_;
                            const int kw0 = w0 < 0 ? -w0 : 0;
                            const int kw1 = std::min(k_, W - w0);
                            for (int kw = kw0; kw < kw1; ++kw) acc += wrow[kw] * xrow[w0 + kw];
                        }
                    }
                    yr[ow] = acc;
                }
            }
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const int N = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
    const int Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    const int cig = c_in_ / groups_;
    const int cog = c_out_ / groups_;

    Tensor dx({N, c_in_, H, W});
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < c_out_; ++co) {
            const int g = co / cog;
            for (int oh = 0; oh < Ho; ++oh) {
                const int h0 = oh * stride_ - pad_;
                const double* gr = grad_out.data() + grad_out.idx(n, co, oh, 0);
                for (int ow = 0; ow < Wo; ++ow) {
                    const double gv = gr[ow];
                    if (gv == 0.0) continue;
                    bias.grad[static_cast<size_t>(co)] += gv;
                    const int w0 = ow * stride_ - pad_;
                    for (int ci = 0; ci < cig; ++ci) {
                        const double* xc = x_.data() + x_.idx(n, g * cig + ci, 0, 0);
                        double* dxc = dx.data() + dx.idx(n, g * cig + ci, 0, 0);
                        const double* wc = weight.value.data() + weight.value.idx(co, ci, 0, 0);
                        double* dwc = weight.grad.data() + weight.grad.idx(co, ci, 0, 0);
                        for (int kh = 0; kh < k_; ++kh) {
                            const int hin = h0 + kh;
                            if (hin < 0 || hin >= H) continue;
                            const double* xrow = xc + static_cast<size_t>(hin) * W;
                            double* dxrow = dxc + static_cast<size_t>(hin) * W;
                            const double* wrow = wc + static_cast<size_t>(kh) * k_;
                            double* dwrow = dwc + static_cast<size_t>(kh) * k_;
                            const int kw0 = w0 < 0 ? -w0 : 0;
                            const int kw1 = std::min(k_, W - w0);
                            for (int kw = kw0; kw < kw1; ++kw) {
                                dwrow[kw] += gv * xrow[w0 + kw];
                                dxrow[w0 + kw] += gv * wrow[kw];
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

void Conv2d::gather(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// Activations

Tensor ReLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (size_t i = 0; i < y.numel(); ++i) {
        if (y[i] < 0.0) y[i] = 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    Tensor dx = grad_out;
    for (size_t i = 0; i < dx.numel(); ++i) {
        if (x_[i] <= 0.0) dx[i] = 0.0;
    }
    return dx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (size_t i = 0; i < y.numel(); ++i) {
        if (y[i] < 0.0) y[i] *= slope_;
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
    Tensor dx = grad_out;
    for (size_t i = 0; i < dx.numel(); ++i) {
        if (x_[i] <= 0.0) dx[i] *= slope_;
    }
    return dx;
}

PReLU::PReLU(std::string name, int channels, double init_slope)
    : slope(name + ".slope", {channels}), channels_(channels) {
    slope.value.fill(init_slope);
}

Tensor PReLU::forward(const Tensor& x) {
    if (x.rank() < 2 || x.dim(1) != channels_) {
        throw std::invalid_argument("PReLU: bad input shape " + x.shape_str());
    }
    x_ = x;
    const int N = x.dim(0);
    const size_t spatial = x.numel() / static_cast<size_t>(N) / static_cast<size_t>(channels_);
    Tensor y = x;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < channels_; ++c) {
            const double a = slope.value[static_cast<size_t>(c)];
            double* p = y.data() + (static_cast<size_t>(n) * channels_ + c) * spatial;
            for (size_t s = 0; s < spatial; ++s) {
                if (p[s] < 0.0) p[s] *= a;
            }
        }
    }
    return y;
}

Tensor PReLU::backward(const Tensor& grad_out) {
    const int N = x_.dim(0);
    const size_t spatial = x_.numel() / static_cast<size_t>(N) / static_cast<size_t>(channels_);
    Tensor dx = grad_out;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < channels_; ++c) {
            const double a = slope.value[static_cast<size_t>(c)];
            const size_t off = (static_cast<size_t>(n) * channels_ + c) * spatial;
            const double* xv = x_.data() + off;
            const double* g = grad_out.data() + off;
            double* d = dx.data() + off;
            double da = 0.0;
            for (size_t s = 0; s < spatial; ++s) {
                if (xv[s] <= 0.0) {
                    da += g[s] * xv[s];
                    d[s] = g[s] * a;
                }
            }
            slope.grad[static_cast<size_t>(c)] += da;
        }
    }
    return dx;
}

void PReLU::gather(std::vector<Parameter*>& out) { out.push_back(&slope); }

// ---------------------------------------------------------------------------
// ChannelLayerNorm

ChannelLayerNorm::ChannelLayerNorm(std::string name, int channels, double eps)
    : gain(name + ".gain", {channels}), bias(name + ".bias", {channels}),
      channels_(channels), eps_(eps) {
    gain.value.fill(1.0);
    bias.value.fill(0.0);
}

Tensor ChannelLayerNorm::forward(const Tensor& x) {
    if (x.rank() != 3 || x.dim(1) != channels_) {
        throw std::invalid_argument("ChannelLayerNorm: bad input shape " + x.shape_str());
    }
    const int N = x.dim(0), C = channels_, L = x.dim(2);
    xhat_ = Tensor({N, C, L});
    inv_std_.assign(static_cast<size_t>(N) * L, 0.0);
    Tensor y({N, C, L});
    for (int n = 0; n < N; ++n) {
        for (int l = 0; l < L; ++l) {
            double mean = 0.0;
            for (int c = 0; c < C; ++c) mean += x.at(n, c, l);
            mean /= C;
            double var = 0.0;
            for (int c = 0; c < C; ++c) {
                const double d = x.at(n, c, l) - mean;
                var += d * d;
            }
            var /= C;
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[static_cast<size_t>(n) * L + l] = inv;
            for (int c = 0; c < C; ++c) {
                const double h = (x.at(n, c, l) - mean) * inv;
                xhat_.at(n, c, l) = h;
                y.at(n, c, l) = gain.value[static_cast<size_t>(c)] * h +
                                bias.value[static_cast<size_t>(c)];
            }
        }
    }
    return y;
}

Tensor ChannelLayerNorm::backward(const Tensor& grad_out) {
    const int N = xhat_.dim(0), C = channels_, L = xhat_.dim(2);
    Tensor dx({N, C, L});
    for (int n = 0; n < N; ++n) {
        for (int l = 0; l < L; ++l) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (int c = 0; c < C; ++c) {
                const double gh = grad_out.at(n, c, l) * gain.value[static_cast<size_t>(c)];
                mean_g += gh;
                mean_gx += gh * xhat_.at(n, c, l);
            }
            mean_g /= C;
            mean_gx /= C;
            const double inv = inv_std_[static_cast<size_t>(n) * L + l];
            for (int c = 0; c < C; ++c) {
                const double gh = grad_out.at(n, c, l) * gain.value[static_cast<size_t>(c)];
                dx.at(n, c, l) = inv * (gh - mean_g - xhat_.at(n, c, l) * mean_gx);
                gain.grad[static_cast<size_t>(c)] +=
                    grad_out.at(n, c, l) * xhat_.at(n, c, l);
                bias.grad[static_cast<size_t>(c)] += grad_out.at(n, c, l);
            }
        }
    }
    return dx;
}

void ChannelLayerNorm::gather(std::vector<Parameter*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// InstanceStandardize

Tensor InstanceStandardize::forward(const Tensor& x) {
    if (x.rank() != 4) throw std::invalid_argument("InstanceStandardize: expects rank-4 input");
    const int N = x.dim(0), C = x.dim(1);
    const size_t S = static_cast<size_t>(x.dim(2)) * static_cast<size_t>(x.dim(3));
    xhat_ = Tensor(x.shape());
    inv_std_.assign(static_cast<size_t>(N) * C, 0.0);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const size_t off = (static_cast<size_t>(n) * C + c) * S;
            const double* p = x.data() + off;
            double mean = 0.0;
            for (size_t s = 0; s < S; ++s) mean += p[s];
            mean /= static_cast<double>(S);
            double var = 0.0;
            for (size_t s = 0; s < S; ++s) {
                const double d = p[s] - mean;
                var += d * d;
            }
            var /= static_cast<double>(S);
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[static_cast<size_t>(n) * C + c] = inv;
            double* h = xhat_.data() + off;
            for (size_t s = 0; s < S; ++s) h[s] = (p[s] - mean) * inv;
        }
    }
    return xhat_;
}

Tensor InstanceStandardize::backward(const Tensor& grad_out) {
    const int N = xhat_.dim(0), C = xhat_.dim(1);
    const size_t S = static_cast<size_t>(xhat_.dim(2)) * static_cast<size_t>(xhat_.dim(3));
    Tensor dx(xhat_.shape());
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const size_t off = (static_cast<size_t>(n) * C + c) * S;
            const double* g = grad_out.data() + off;
            const double* h = xhat_.data() + off;
            double mean_g = 0.0, mean_gh = 0.0;
            for (size_t s = 0; s < S; ++s) {
                mean_g += g[s];
                mean_gh += g[s] * h[s];
            }
            mean_g /= static_cast<double>(S);
            mean_gh /= static_cast<double>(S);
            const double inv = inv_std_[static_cast<size_t>(n) * C + c];
            double* d = dx.data() + off;
            for (size_t s = 0; s < S; ++s) {
                d[s] = inv * (g[s] - mean_g - h[s] * mean_gh);
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool2d

Tensor GlobalAvgPool2d::forward(const Tensor& x) {
    if (x.rank() != 4) throw std::invalid_argument("GlobalAvgPool2d: expects rank-4 input");
    in_shape_ = x.shape();
    const int N = x.dim(0), C = x.dim(1);
    const size_t S = static_cast<size_t>(x.dim(2)) * static_cast<size_t>(x.dim(3));
    Tensor y({N, C});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* p = x.data() + (static_cast<size_t>(n) * C + c) * S;
            double acc = 0.0;
            for (size_t s = 0; s < S; ++s) acc += p[s];
            y.at(n, c) = acc / static_cast<double>(S);
        }
    }
    return y;
}

Tensor GlobalAvgPool2d::backward(const Tensor& grad_out) {
    const int N = in_shape_[0], C = in_shape_[1];
    const size_t S = static_cast<size_t>(in_shape_[2]) * static_cast<size_t>(in_shape_[3]);
    Tensor dx(in_shape_);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double g = grad_out.at(n, c) / static_cast<double>(S);
            double* d = dx.data() + (static_cast<size_t>(n) * C + c) * S;
            for (size_t s = 0; s < S; ++s) d[s] = g;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.emplace_back(Tensor::zeros_like(p->value));
        v_.emplace_back(Tensor::zeros_like(p->value));
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (size_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

}  // namespace clpscf::nn
