// Test-only oracles: independent, brute-force implementations used to
// freeze expected values. Deliberately share no code with the library
// paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// |DFT| of a real signal at an arbitrary analysis frequency (Hz).
inline double dft_magnitude(std::span<const double> x, double freq_hz, double sample_rate) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t t = 0; t < x.size(); ++t) {
        const double ang = -2.0 * std::numbers::pi * freq_hz * static_cast<double>(t) / sample_rate;
        acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    return std::abs(acc);
}

// Naive O(n^2) DFT power spectrum of one frame (no window).
inline std::vector<double> dft_power(std::span<const double> frame) {
    const size_t n = frame.size();
    std::vector<double> power(n / 2 + 1);
    for (size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t t = 0; t < n; ++t) {
            const double ang =
                -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
            acc += frame[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        power[k] = std::norm(acc);
    }
    return power;
}

inline double vec_dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double vec_norm(std::span<const double> a) { return std::sqrt(vec_dot(a, a)); }

inline double cosine(std::span<const double> a, std::span<const double> b) {
    return vec_dot(a, b) / (vec_norm(a) * vec_norm(b));
}

// Scalar double-loop evaluation of the machine-ID contrastive loss:
// per anchor, per positive, straight from the formula with no
// stabilization. Anchors without positives are skipped and excluded
// from the averaging.
inline double cl_meta(const std::vector<std::vector<double>>& z, const std::vector<int>& labels,
                      double tau) {
    const size_t n = z.size();
    double total = 0.0;
    int used = 0;
    for (size_t i = 0; i < n; ++i) {
        std::vector<size_t> positives;
        for (size_t k = 0; k < n; ++k) {
            if (k != i && labels[k] == labels[i]) positives.push_back(k);
        }
        if (positives.empty()) continue;
        ++used;
        double denom = 0.0;
        for (size_t j = 0; j < n; ++j) {
            if (j != i) denom += std::exp(cosine(z[i], z[j]) / tau);
        }
        double anchor = 0.0;
        for (size_t k : positives) {
            anchor += std::log(std::exp(cosine(z[i], z[k]) / tau) / denom);
        }
        total += anchor / static_cast<double>(positives.size());
    }
    return -total / used;
}

// Scalar evaluation of the angular-margin classification loss, straight
// from the definition (normalize, add margin on the target angle via
// the cos addition formula with the over-rotation fallback, scaled
// softmax cross-entropy).
inline double arcface(const std::vector<std::vector<double>>& h, const std::vector<int>& labels,
                      const std::vector<std::vector<double>>& w, double margin, double scale) {
    const double clamp = 1.0 - 1e-7;
    double total = 0.0;
    for (size_t n = 0; n < h.size(); ++n) {
        const int y = labels[n];
        std::vector<double> logits(w.size());
        for (size_t c = 0; c < w.size(); ++c) {
            double ct = std::clamp(cosine(h[n], w[c]), -clamp, clamp);
            if (static_cast<int>(c) == y) {
                if (ct > std::cos(std::numbers::pi - margin)) {
                    logits[c] = scale * (ct * std::cos(margin) -
                                         std::sqrt(1.0 - ct * ct) * std::sin(margin));
                } else {
                    logits[c] = scale * (ct - margin * std::sin(margin));
                }
            } else {
                logits[c] = scale * ct;
            }
        }
        double denom = 0.0;
        for (double t : logits) denom += std::exp(t);
        total += -std::log(std::exp(logits[static_cast<size_t>(y)]) / denom);
    }
    return total / static_cast<double>(h.size());
}

// Plain cosine-softmax cross-entropy (no margin, no clamping).
inline double cosine_softmax_ce(const std::vector<std::vector<double>>& h,
                                const std::vector<int>& labels,
                                const std::vector<std::vector<double>>& w, double scale) {
    double total = 0.0;
    for (size_t n = 0; n < h.size(); ++n) {
        std::vector<double> logits(w.size());
        for (size_t c = 0; c < w.size(); ++c) logits[c] = scale * cosine(h[n], w[c]);
        double denom = 0.0;
        for (double t : logits) denom += std::exp(t);
        total += -std::log(std::exp(logits[static_cast<size_t>(labels[n])]) / denom);
    }
    return total / static_cast<double>(h.size());
}

// Naive softmax negative log probability.
inline double neg_log_softmax(const std::vector<double>& logits, int cls) {
    double denom = 0.0;
    for (double t : logits) denom += std::exp(t);
    return -std::log(std::exp(logits[static_cast<size_t>(cls)]) / denom);
}

// Exhaustive pairwise AUC: wins + half ties over all (anomalous,
// normal) pairs, exact integer counting.
inline double auc_pairwise(std::span<const double> normals, std::span<const double> anoms) {
    int64_t units = 0;  // 2 per win, 1 per tie
    for (double a : anoms) {
        for (double n : normals) {
            if (a > n) {
                units += 2;
            } else if (a == n) {
                units += 1;
            }
        }
    }
    return static_cast<double>(units) /
           (2.0 * static_cast<double>(anoms.size()) * static_cast<double>(normals.size()));
}

// Threshold-enumeration pAUC: recount TPR/FPR at every distinct score,
// connect the vertices linearly, integrate trapezoids over [0, p],
// normalize by p.
inline double pauc_threshold_enum(std::span<const double> normals, std::span<const double> anoms,
                                  double p) {
    std::vector<double> thresholds(anoms.begin(), anoms.end());
    thresholds.insert(thresholds.end(), normals.begin(), normals.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    auto rate_at = [](std::span<const double> scores, double thr) {
        int64_t c = 0;
        for (double s : scores) {
            if (s >= thr) ++c;
        }
        return static_cast<double>(c) / static_cast<double>(scores.size());
    };

    std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
    for (double thr : thresholds) {
        curve.emplace_back(rate_at(normals, thr), rate_at(anoms, thr));
    }

    double area = 0.0;
    for (size_t i = 1; i < curve.size(); ++i) {
        const auto [x1, y1] = curve[i - 1];
        const auto [x2, y2] = curve[i];
        if (x2 <= p) {
            area += (x2 - x1) * (y1 + y2) / 2.0;
        } else if (x1 < p) {
            const double yp = y1 + (y2 - y1) * (p - x1) / (x2 - x1);
            area += (p - x1) * (y1 + yp) / 2.0;
        }
    }
    return area / p;
}

}  // namespace oracle
