#include "clpscf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace clpscf {

namespace {

constexpr double kCosClamp = 1.0 - 1e-7;

double row_norm(const double* p, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += p[i] * p[i];
    return std::sqrt(acc);
}

double dot(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    }
    const int d = static_cast<int>(a.size());
    const double na = row_norm(a.data(), d);
    const double nb = row_norm(b.data(), d);
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    }
    return std::clamp(dot(a.data(), b.data(), d) / (na * nb), -1.0, 1.0);
}

double cl_meta_loss(const Tensor& z, const std::vector<int>& labels, double tau,
                    Tensor* grad_z, ClMetaStats* stats) {
    if (z.rank() != 2) throw std::invalid_argument("cl_meta_loss: z must be N x D");
    const int N = z.dim(0);
    const int D = z.dim(1);
    if (N < 2) throw std::invalid_argument("cl_meta_loss: need at least 2 embeddings");
    if (static_cast<int>(labels.size()) != N) {
        throw std::invalid_argument("cl_meta_loss: labels/embeddings size mismatch");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("cl_meta_loss: tau must be > 0");

    std::vector<double> norms(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
        norms[static_cast<size_t>(i)] = row_norm(z.data() + z.idx(i, 0), D);
        if (!(norms[static_cast<size_t>(i)] > 0.0)) {
            throw std::invalid_argument("cl_meta_loss: zero-norm embedding row " +
                                        std::to_string(i));
        }
    }

    // Cosine similarity matrix (symmetric; diagonal unused).
    std::vector<double> sim(static_cast<size_t>(N) * N, 0.0);
    for (int i = 0; i < N; ++i) {
        for (int j = i + 1; j < N; ++j) {
            const double s = std::clamp(
                dot(z.data() + z.idx(i, 0), z.data() + z.idx(j, 0), D) /
                    (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]),
                -1.0, 1.0);
            sim[static_cast<size_t>(i) * N + j] = s;
            sim[static_cast<size_t>(j) * N + i] = s;
        }
    }

    // Per-anchor log-sum-exp over all j != i and softmax probabilities.
    std::vector<double> lse(static_cast<size_t>(N));
    std::vector<double> prob(static_cast<size_t>(N) * N, 0.0);
    for (int i = 0; i < N; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            mx = std::max(mx, sim[static_cast<size_t>(i) * N + j] / tau);
        }
        double acc = 0.0;
        for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            acc += std::exp(sim[static_cast<size_t>(i) * N + j] / tau - mx);
        }
        lse[static_cast<size_t>(i)] = mx + std::log(acc);
        for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            prob[static_cast<size_t>(i) * N + j] =
                std::exp(sim[static_cast<size_t>(i) * N + j] / tau - lse[static_cast<size_t>(i)]);
        }
    }

    // Anchors with positives.
    std::vector<int> pos_count(static_cast<size_t>(N), 0);
    int used = 0;
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (j != i && labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
                ++pos_count[static_cast<size_t>(i)];
            }
        }
        if (pos_count[static_cast<size_t>(i)] > 0) ++used;
    }
    if (used == 0) throw std::invalid_argument("cl_meta_loss: no positive pairs in batch");
    if (stats) {
        stats->anchors_used = used;
        stats->anchors_skipped = N - used;
    }

    double loss = 0.0;
    for (int i = 0; i < N; ++i) {
        const int ki = pos_count[static_cast<size_t>(i)];
        if (ki == 0) continue;
        double anchor = 0.0;
        for (int k = 0; k < N; ++k) {
            if (k == i || labels[static_cast<size_t>(k)] != labels[static_cast<size_t>(i)]) continue;
            anchor += lse[static_cast<size_t>(i)] - sim[static_cast<size_t>(i) * N + k] / tau;
        }
        loss += anchor / ki;
    }
    loss /= used;

    if (grad_z) {
        *grad_z = Tensor({N, D});
        // dL/ds_ij for each ordered pair, then chain through the cosine.
        for (int i = 0; i < N; ++i) {
            const int ki = pos_count[static_cast<size_t>(i)];
            if (ki == 0) continue;
            for (int j = 0; j < N; ++j) {
                if (j == i) continue;
                const bool positive =
                    labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)];
                const double c =
                    (prob[static_cast<size_t>(i) * N + j] - (positive ? 1.0 / ki : 0.0)) /
                    (static_cast<double>(used) * tau);
                if (c == 0.0) continue;
                const double ni = norms[static_cast<size_t>(i)];
                const double nj = norms[static_cast<size_t>(j)];
                const double s = sim[static_cast<size_t>(i) * N + j];
                const double* zi = z.data() + z.idx(i, 0);
                const double* zj = z.data() + z.idx(j, 0);
                double* gi = grad_z->data() + grad_z->idx(i, 0);
                double* gj = grad_z->data() + grad_z->idx(j, 0);
                const double inv_ij = 1.0 / (ni * nj);
                const double si = s / (ni * ni);
                const double sj = s / (nj * nj);
                for (int d = 0; d < D; ++d) {
                    gi[d] += c * (zj[d] * inv_ij - si * zi[d]);
                    gj[d] += c * (zi[d] * inv_ij - sj * zj[d]);
                }
            }
        }
    }
    return loss;
}

void ArcFaceParams::validate() const {
    if (weight.rank() != 2) throw std::invalid_argument("ArcFaceParams: weight must be C x d");
    if (!(scale > 0.0)) throw std::invalid_argument("ArcFaceParams: scale must be > 0");
    if (!(margin >= 0.0) || margin >= std::numbers::pi) {
        throw std::invalid_argument("ArcFaceParams: margin must lie in [0, pi)");
    }
}

double arcface_loss(const Tensor& h, const std::vector<int>& labels,
                    const ArcFaceParams& params, Tensor* grad_h, Tensor* grad_w) {
    params.validate();
    if (h.rank() != 2) throw std::invalid_argument("arcface_loss: h must be N x d");
    const int N = h.dim(0);
    const int d = h.dim(1);
    const int C = params.weight.dim(0);
    if (params.weight.dim(1) != d) {
        throw std::invalid_argument("arcface_loss: weight/latent dimension mismatch");
    }
    if (static_cast<int>(labels.size()) != N) {
        throw std::invalid_argument("arcface_loss: labels size mismatch");
    }
    for (int n = 0; n < N; ++n) {
        if (labels[static_cast<size_t>(n)] < 0 || labels[static_cast<size_t>(n)] >= C) {
            throw std::invalid_argument("arcface_loss: label out of range");
        }
    }

    const double m = params.margin;
    const double s = params.scale;
    const double cos_m = std::cos(m);
    const double sin_m = std::sin(m);
    const double fallback_threshold = std::cos(std::numbers::pi - m);

    std::vector<double> wnorm(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
        wnorm[static_cast<size_t>(c)] = row_norm(params.weight.data() + params.weight.idx(c, 0), d);
        if (!(wnorm[static_cast<size_t>(c)] > 0.0)) {
            throw std::invalid_argument("arcface_loss: zero-norm weight row " + std::to_string(c));
        }
    }

    if (grad_h) *grad_h = Tensor({N, d});
    if (grad_w) *grad_w = Tensor({C, d});

    std::vector<double> cosines(static_cast<size_t>(C));
    std::vector<double> logits(static_cast<size_t>(C));
    std::vector<double> dlogit_dcos(static_cast<size_t>(C));

    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        const double* hn = h.data() + h.idx(n, 0);
        const double hn_norm = row_norm(hn, d);
        if (!(hn_norm > 0.0)) {
            throw std::invalid_argument("arcface_loss: zero-norm latent row " + std::to_string(n));
        }
        const int y = labels[static_cast<size_t>(n)];

        for (int c = 0; c < C; ++c) {
            const double* wc = params.weight.data() + params.weight.idx(c, 0);
            double cos_t = dot(hn, wc, d) / (hn_norm * wnorm[static_cast<size_t>(c)]);
            cos_t = std::clamp(cos_t, -kCosClamp, kCosClamp);
            cosines[static_cast<size_t>(c)] = cos_t;
            if (c == y) {
                if (cos_t > fallback_threshold) {
                    const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
                    logits[static_cast<size_t>(c)] = s * (cos_t * cos_m - sin_t * sin_m);
                    dlogit_dcos[static_cast<size_t>(c)] = s * (cos_m + cos_t / sin_t * sin_m);
                } else {
                    // theta + m beyond pi: cos is no longer monotone there.
                    logits[static_cast<size_t>(c)] = s * (cos_t - m * sin_m);
                    dlogit_dcos[static_cast<size_t>(c)] = s;
                }
            } else {
                logits[static_cast<size_t>(c)] = s * cos_t;
                dlogit_dcos[static_cast<size_t>(c)] = s;
            }
        }

        // Stable softmax cross-entropy.
        double mx = logits[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, logits[static_cast<size_t>(c)]);
        double denom = 0.0;
        for (int c = 0; c < C; ++c) denom += std::exp(logits[static_cast<size_t>(c)] - mx);
        const double lse = mx + std::log(denom);
        loss += lse - logits[static_cast<size_t>(y)];

        if (grad_h || grad_w) {
            for (int c = 0; c < C; ++c) {
                const double p = std::exp(logits[static_cast<size_t>(c)] - lse);
                const double dcos =
                    (p - (c == y ? 1.0 : 0.0)) * dlogit_dcos[static_cast<size_t>(c)] / N;
                if (dcos == 0.0) continue;
                const double* wc = params.weight.data() + params.weight.idx(c, 0);
                const double inv = 1.0 / (hn_norm * wnorm[static_cast<size_t>(c)]);
                const double cos_t = cosines[static_cast<size_t>(c)];
                if (grad_h) {
                    double* gh = grad_h->data() + grad_h->idx(n, 0);
                    const double ch = cos_t / (hn_norm * hn_norm);
                    for (int i = 0; i < d; ++i) gh[i] += dcos * (wc[i] * inv - ch * hn[i]);
                }
                if (grad_w) {
                    double* gw = grad_w->data() + grad_w->idx(c, 0);
                    const double cw =
                        cos_t / (wnorm[static_cast<size_t>(c)] * wnorm[static_cast<size_t>(c)]);
                    for (int i = 0; i < d; ++i) gw[i] += dcos * (hn[i] * inv - cw * wc[i]);
                }
            }
        }
    }
    return loss / N;
}

std::vector<double> cosine_logits(std::span<const double> h, const Tensor& weight,
                                  double scale, double margin, int margin_class) {
    const int C = weight.dim(0);
    const int d = weight.dim(1);
    if (static_cast<int>(h.size()) != d) {
        throw std::invalid_argument("cosine_logits: latent dimension mismatch");
    }
    const double hn = row_norm(h.data(), d);
    if (!(hn > 0.0)) throw std::invalid_argument("cosine_logits: zero-norm latent");
    const double cos_m = std::cos(margin);
    const double sin_m = std::sin(margin);
    const double fallback_threshold = std::cos(std::numbers::pi - margin);

    std::vector<double> logits(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
        const double* wc = weight.data() + weight.idx(c, 0);
        const double wn = row_norm(wc, d);
        if (!(wn > 0.0)) throw std::invalid_argument("cosine_logits: zero-norm weight row");
        double cos_t = std::clamp(dot(h.data(), wc, d) / (hn * wn), -kCosClamp, kCosClamp);
        if (c == margin_class && margin > 0.0) {
            if (cos_t > fallback_threshold) {
                const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
                logits[static_cast<size_t>(c)] = scale * (cos_t * cos_m - sin_t * sin_m);
            } else {
                logits[static_cast<size_t>(c)] = scale * (cos_t - margin * sin_m);
            }
        } else {
            logits[static_cast<size_t>(c)] = scale * cos_t;
        }
    }
    return logits;
}

double log_softmax_at(std::span<const double> logits, int cls) {
    if (cls < 0 || cls >= static_cast<int>(logits.size())) {
        throw std::invalid_argument("log_softmax_at: class out of range");
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - mx);
    return logits[static_cast<size_t>(cls)] - (mx + std::log(denom));
}

}  // namespace clpscf
