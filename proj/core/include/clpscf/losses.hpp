#pragma once

#include <span>
#include <vector>

#include "clpscf/tensor.hpp"

namespace clpscf {

// Cosine similarity of two vectors, clamped to [-1, 1] against rounding.
// Throws on zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct ClMetaStats {
    int anchors_used = 0;     // anchors with at least one positive
    int anchors_skipped = 0;  // anchors with no positive in the batch
};

// Machine-ID contrastive loss over a batch of embeddings z (N x D) with
// class labels. For each anchor i, positives are the other batch entries
// with the same label; the softmax denominator runs over every j != i,
// positives included:
//
//   L = -(1/N) sum_i (1/|K(i)|) sum_{k in K(i)}
//         log( exp(s_ik / tau) / sum_{j != i} exp(s_ij / tau) )
//
// Anchors with no positive contribute nothing and are excluded from the
// averaging (stats reports how many were skipped). Throws when tau <= 0,
// when N < 2, when any row has zero norm, or when every anchor lacks
// positives. Computed with log-sum-exp stabilization.
//
// When grad_z is non-null it receives dL/dz (same shape as z).
double cl_meta_loss(const Tensor& z, const std::vector<int>& labels, double tau,
                    Tensor* grad_z = nullptr, ClMetaStats* stats = nullptr);

struct ArcFaceParams {
    Tensor weight;   // (C, latent_dim); rows are normalized on use
    double margin = 1.0;  // radians, in [0, pi)
    double scale = 30.0;

    void validate() const;
};

// Additive-angular-margin softmax cross-entropy over latent features
// h (N x latent_dim). Per sample: cos(theta_c) between the normalized
// feature and each normalized weight row; the target logit becomes
// s*cos(theta_y + m) via cos(theta+m) = cos*cos(m) - sin*sin(m), with
// the standard fallback s*(cos(theta) - m*sin(m)) once theta + m > pi;
// non-target logits are s*cos(theta_c). Loss is the mean cross-entropy.
//
// grad_h / grad_w, when non-null, receive dL/dh and dL/dweight.
double arcface_loss(const Tensor& h, const std::vector<int>& labels,
                    const ArcFaceParams& params, Tensor* grad_h = nullptr,
                    Tensor* grad_w = nullptr);

// Scaled cosine logits for one latent feature against every weight row.
// When margin_class >= 0 the margin is applied to that class, matching
// the training-time logits; scoring uses margin_class = -1.
std::vector<double> cosine_logits(std::span<const double> h, const Tensor& weight,
                                  double scale, double margin = 0.0,
                                  int margin_class = -1);

// log-softmax of a logits vector at index `cls`, stabilized.
double log_softmax_at(std::span<const double> logits, int cls);

}  // namespace clpscf
