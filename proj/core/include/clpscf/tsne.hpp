#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace clpscf {

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 500;
    double learning_rate = 200.0;
    uint64_t seed = 0;
};

// Exact (O(N^2)) t-SNE to 2-D: Gaussian input affinities with per-point
// bandwidth found by bisection on the target perplexity, symmetrized,
// Student-t low-dimensional kernel, gradient descent with momentum and
// early exaggeration. Perplexity is clamped to (N - 1) / 3 when the
// point set is small.
std::vector<std::array<double, 2>> tsne_embed(const std::vector<std::vector<double>>& points,
                                              const TsneOptions& opts = {});

}  // namespace clpscf
