#include "clpscf/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "clpscf/rng.hpp"

namespace clpscf {

namespace {

std::vector<double> pairwise_sq_dists(const std::vector<std::vector<double>>& x) {
    const size_t n = x.size();
    std::vector<double> d2(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (size_t k = 0; k < x[i].size(); ++k) {
                const double d = x[i][k] - x[j][k];
                acc += d * d;
            }
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    }
    return d2;
}

// Row-wise conditional probabilities with bandwidth beta found by
// bisection so that the row entropy matches log(perplexity).
void row_affinities(const std::vector<double>& d2, size_t n, size_t i, double perplexity,
                    std::vector<double>& row) {
    const double target = std::log(perplexity);
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 64; ++iter) {
        double sum = 0.0, weighted = 0.0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) {
                row[j] = 0.0;
                continue;
            }
            const double p = std::exp(-beta * d2[i * n + j]);
            row[j] = p;
            sum += p;
            weighted += beta * d2[i * n + j] * p;
        }
        if (sum <= 0.0) {
            beta_hi = beta;
            beta = (beta_lo + beta) / 2.0;
            continue;
        }
        const double entropy = std::log(sum) + weighted / sum;
        const double diff = entropy - target;
        if (std::abs(diff) < 1e-5) break;
        if (diff > 0.0) {
            beta_lo = beta;
            beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
        } else {
            beta_hi = beta;
            beta = (beta_lo + beta) / 2.0;
        }
    }
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += row[j];
    if (sum <= 0.0) {
        // Degenerate row (all points identical): spread uniformly.
        for (size_t j = 0; j < n; ++j) row[j] = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
    } else {
        for (size_t j = 0; j < n; ++j) row[j] /= sum;
    }
}

}  // namespace

std::vector<std::array<double, 2>> tsne_embed(const std::vector<std::vector<double>>& points,
                                              const TsneOptions& opts) {
    const size_t n = points.size();
    if (n == 0) throw std::invalid_argument("tsne_embed: no points");
    if (n == 1) return {{0.0, 0.0}};
    for (const auto& p : points) {
        if (p.size() != points[0].size()) {
            throw std::invalid_argument("tsne_embed: inconsistent point dimensions");
        }
    }
    if (!(opts.perplexity > 0.0)) throw std::invalid_argument("tsne_embed: perplexity must be > 0");
    if (opts.iterations < 1) throw std::invalid_argument("tsne_embed: iterations must be >= 1");

    const double perplexity =
        std::max(1.0, std::min(opts.perplexity, static_cast<double>(n - 1) / 3.0));

    const auto d2 = pairwise_sq_dists(points);
    std::vector<double> P(n * n, 0.0);
    {
        std::vector<double> row(n);
        for (size_t i = 0; i < n; ++i) {
            row_affinities(d2, n, i, perplexity, row);
            for (size_t j = 0; j < n; ++j) P[i * n + j] = row[j];
        }
    }
    // Symmetrize.
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double v = (P[i * n + j] + P[j * n + i]) / (2.0 * static_cast<double>(n));
            P[i * n + j] = v;
            P[j * n + i] = v;
        }
        P[i * n + i] = 0.0;
    }

    Rng rng(mix_seed(opts.seed, 0x74736e65ULL));
    std::vector<std::array<double, 2>> y(n), inc(n, {0.0, 0.0});
    for (auto& p : y) {
        p[0] = rng.normal(0.0, 1e-4);
        p[1] = rng.normal(0.0, 1e-4);
    }

    const int exaggeration_until = std::min(100, opts.iterations / 2);
    std::vector<double> Q(n * n, 0.0);
    std::vector<std::array<double, 2>> grad(n);

    for (int iter = 0; iter < opts.iterations; ++iter) {
        const double exaggeration = iter < exaggeration_until ? 12.0 : 1.0;
        const double momentum = iter < 250 ? 0.5 : 0.8;

        double qsum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                const double dx = y[i][0] - y[j][0];
                const double dy = y[i][1] - y[j][1];
                const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                Q[i * n + j] = q;
                Q[j * n + i] = q;
                qsum += 2.0 * q;
            }
        }
        qsum = std::max(qsum, 1e-12);

        for (size_t i = 0; i < n; ++i) grad[i] = {0.0, 0.0};
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double q = Q[i * n + j];
                const double coeff = 4.0 * (exaggeration * P[i * n + j] - q / qsum) * q;
                grad[i][0] += coeff * (y[i][0] - y[j][0]);
                grad[i][1] += coeff * (y[i][1] - y[j][1]);
            }
        }
        for (size_t i = 0; i < n; ++i) {
            for (int k = 0; k < 2; ++k) {
                inc[i][k] = momentum * inc[i][k] - opts.learning_rate * grad[i][k];
                y[i][k] += inc[i][k];
            }
        }
        // Re-center to keep coordinates bounded.
        double cx = 0.0, cy = 0.0;
        for (const auto& p : y) {
            cx += p[0];
            cy += p[1];
        }
        cx /= static_cast<double>(n);
        cy /= static_cast<double>(n);
        for (auto& p : y) {
            p[0] -= cx;
            p[1] -= cy;
        }
    }
    return y;
}

}  // namespace clpscf
