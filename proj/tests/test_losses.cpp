#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "clpscf/losses.hpp"
#include "clpscf/rng.hpp"
#include "clpscf/tensor.hpp"
#include "oracles.hpp"

using namespace clpscf;

namespace {

Tensor to_tensor(const std::vector<std::vector<double>>& rows) {
    Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = 0; j < rows[i].size(); ++j) {
            t.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
        }
    }
    return t;
}

std::vector<std::vector<double>> random_rows(Rng& rng, int n, int d) {
    std::vector<std::vector<double>> rows(static_cast<size_t>(n),
                                          std::vector<double>(static_cast<size_t>(d)));
    for (auto& r : rows) {
        for (auto& v : r) v = rng.normal();
    }
    return rows;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

}  // namespace

TEST_CASE("cosine_similarity closed forms") {
    std::vector<double> e1{1.0, 0.0};
    std::vector<double> e2{0.0, 1.0};
    std::vector<double> d{1.0, 1.0};
    CHECK(cosine_similarity(e1, e1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_similarity(d, e1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(cosine_similarity(e1, e2) == cosine_similarity(e2, e1));
}

TEST_CASE("cosine_similarity rejects zero norm") {
    std::vector<double> z{0.0, 0.0};
    std::vector<double> e{1.0, 0.0};
    CHECK_THROWS_AS(cosine_similarity(z, e), std::invalid_argument);
    CHECK_THROWS_AS(cosine_similarity(e, z), std::invalid_argument);
}

TEST_CASE("cl_meta_loss: two same-label embeddings give zero") {
    Tensor z = to_tensor({{0.3, -1.2, 0.5}, {2.0, 0.1, -0.4}});
    CHECK(cl_meta_loss(z, {7, 7}, 0.05) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cl_meta_loss: identical embeddings, two classes, equals log(N-1)") {
    Tensor z = to_tensor({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
    const double loss = cl_meta_loss(z, {0, 0, 1, 1}, 0.05);
    CHECK(std::abs(loss - std::log(3.0)) < 1e-9);
    CHECK(loss == doctest::Approx(1.09861).epsilon(1e-5));
}

TEST_CASE("cl_meta_loss matches the scalar double-loop oracle") {
    Rng rng(411);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(0, 5));
        const int d = 2 + static_cast<int>(rng.uniform_int(0, 4));
        auto rows = random_rows(rng, n, d);
        std::vector<int> labels(static_cast<size_t>(n));
        bool has_pos = false;
        while (!has_pos) {
            for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 2));
            for (int i = 0; i < n && !has_pos; ++i) {
                for (int j = 0; j < n; ++j) {
                    if (j != i && labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
                        has_pos = true;
                        break;
                    }
                }
            }
        }
        const double tau = rng.uniform(0.05, 1.0);
        const double expected = oracle::cl_meta(rows, labels, tau);
        const double got = cl_meta_loss(to_tensor(rows), labels, tau);
        CHECK(rel_err(got, expected) < 1e-6);
    }
}

TEST_CASE("cl_meta_loss invariances") {
    Rng rng(901);
    auto rows = random_rows(rng, 6, 4);
    std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const double base = cl_meta_loss(to_tensor(rows), labels, 0.2);

    SUBCASE("positive rescaling of rows") {
        auto scaled = rows;
        scaled[2] = rows[2];
        for (auto& v : scaled[2]) v *= 17.5;
        for (auto& v : scaled[5]) v *= 0.003;
        CHECK(cl_meta_loss(to_tensor(scaled), labels, 0.2) == doctest::Approx(base).epsilon(1e-10));
    }
    SUBCASE("simultaneous permutation of rows and labels") {
        std::vector<size_t> perm{3, 0, 5, 1, 4, 2};
        std::vector<std::vector<double>> prows;
        std::vector<int> plabels;
        for (size_t p : perm) {
            prows.push_back(rows[p]);
            plabels.push_back(labels[p]);
        }
        CHECK(cl_meta_loss(to_tensor(prows), plabels, 0.2) == doctest::Approx(base).epsilon(1e-10));
    }
    SUBCASE("relabeling by a bijection") {
        std::vector<int> relabeled{9, 9, 4, 4, 7, 7};
        CHECK(cl_meta_loss(to_tensor(rows), relabeled, 0.2) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("non-negative on random batches") {
        for (int t = 0; t < 20; ++t) {
            auto r = random_rows(rng, 5, 3);
            std::vector<int> l{0, 0, 1, 1, 1};
            CHECK(cl_meta_loss(to_tensor(r), l, rng.uniform(0.05, 2.0)) >= 0.0);
        }
    }
}

TEST_CASE("cl_meta_loss falls as the positive/negative gap grows") {
    // Two classes on the unit circle; class 1 rotates away from class 0.
    auto batch_at = [](double angle) {
        return to_tensor({{1.0, 0.0},
                          {1.0, 0.0},
                          {std::cos(angle), std::sin(angle)},
                          {std::cos(angle), std::sin(angle)}});
    };
    std::vector<int> labels{0, 0, 1, 1};
    double prev = cl_meta_loss(batch_at(0.2), labels, 0.1);
    for (double angle : {0.6, 1.2, 1.8, 2.6, 3.1}) {
        const double cur = cl_meta_loss(batch_at(angle), labels, 0.1);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("cl_meta_loss error paths") {
    Tensor z = to_tensor({{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(cl_meta_loss(z, {0, 1}, 0.1), std::invalid_argument);   // no positives
    CHECK_THROWS_AS(cl_meta_loss(z, {0, 0}, 0.0), std::invalid_argument);   // tau
    CHECK_THROWS_AS(cl_meta_loss(z, {0, 0}, -1.0), std::invalid_argument);  // tau
    Tensor zz = to_tensor({{0.0, 0.0}, {1.0, 0.0}});
    CHECK_THROWS_AS(cl_meta_loss(zz, {0, 0}, 0.1), std::invalid_argument);  // zero norm
    Tensor one = to_tensor({{1.0, 0.0}});
    CHECK_THROWS_AS(cl_meta_loss(one, {0}, 0.1), std::invalid_argument);    // N < 2
}

TEST_CASE("cl_meta_loss skips anchors without positives but keeps the rest") {
    Rng rng(77);
    auto rows = random_rows(rng, 5, 3);
    std::vector<int> labels{0, 0, 1, 1, 2};  // the last anchor has no positive
    ClMetaStats stats;
    const double loss = cl_meta_loss(to_tensor(rows), labels, 0.3, nullptr, &stats);
    CHECK(stats.anchors_used == 4);
    CHECK(stats.anchors_skipped == 1);
    CHECK(std::isfinite(loss));
    CHECK(loss == doctest::Approx(oracle::cl_meta(rows, labels, 0.3)).epsilon(1e-10));
}

TEST_CASE("arcface_loss matches the scalar oracle") {
    Rng rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(0, 4));
        const int c = 2 + static_cast<int>(rng.uniform_int(0, 3));
        const int d = 2 + static_cast<int>(rng.uniform_int(0, 4));
        auto h = random_rows(rng, n, d);
        auto w = random_rows(rng, c, d);
        std::vector<int> labels(static_cast<size_t>(n));
        for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, static_cast<uint64_t>(c - 1)));

        ArcFaceParams params;
        params.weight = to_tensor(w);
        params.margin = rng.uniform(0.0, 1.2);
        params.scale = rng.uniform(1.0, 40.0);

        const double expected = oracle::arcface(h, labels, w, params.margin, params.scale);
        const double got = arcface_loss(to_tensor(h), labels, params);
        CHECK(rel_err(got, expected) < 1e-6);
    }
}

TEST_CASE("arcface_loss with m=0, s=1 equals cosine-softmax cross-entropy") {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = random_rows(rng, 4, 5);
        auto w = random_rows(rng, 3, 5);
        std::vector<int> labels{0, 2, 1, 2};
        ArcFaceParams params;
        params.weight = to_tensor(w);
        params.margin = 0.0;
        params.scale = 1.0;
        const double got = arcface_loss(to_tensor(h), labels, params);
        const double expected = oracle::cosine_softmax_ce(h, labels, w, 1.0);
        CHECK(std::abs(got - expected) < 1e-9);
    }
}

TEST_CASE("arcface_loss closed form: aligned sample, orthogonal non-targets") {
    // h aligned with the target row and orthogonal to the others:
    // target logit 30*cos(1), non-target logits 0.
    const int C = 4;
    std::vector<std::vector<double>> w{{1.0, 0.0, 0.0, 0.0},
                                       {0.0, 1.0, 0.0, 0.0},
                                       {0.0, 0.0, 1.0, 0.0},
                                       {0.0, 0.0, 0.0, 1.0}};
    std::vector<std::vector<double>> h{{2.5, 0.0, 0.0, 0.0}};
    ArcFaceParams params;
    params.weight = to_tensor(w);
    params.margin = 1.0;
    params.scale = 30.0;

    const double target_logit = 30.0 * std::cos(1.0);
    CHECK(target_logit == doctest::Approx(16.2091).epsilon(1e-4));
    const double expected =
        -std::log(std::exp(target_logit) / (std::exp(target_logit) + (C - 1)));
    const double got = arcface_loss(to_tensor(h), {0}, params);
    // The similarity clamp nudges cos(theta) off 1 by 1e-7.
    CHECK(std::abs(got - expected) < 1e-8);
}

TEST_CASE("arcface_loss error paths") {
    std::vector<std::vector<double>> w{{1.0, 0.0}, {0.0, 1.0}};
    std::vector<std::vector<double>> h{{1.0, 1.0}};
    ArcFaceParams params;
    params.weight = to_tensor(w);

    params.margin = -0.1;
    CHECK_THROWS_AS(arcface_loss(to_tensor(h), {0}, params), std::invalid_argument);
    params.margin = std::numbers::pi;
    CHECK_THROWS_AS(arcface_loss(to_tensor(h), {0}, params), std::invalid_argument);
    params.margin = 1.0;
    params.scale = 0.0;
    CHECK_THROWS_AS(arcface_loss(to_tensor(h), {0}, params), std::invalid_argument);
    params.scale = 30.0;
    CHECK_THROWS_AS(arcface_loss(to_tensor({{0.0, 0.0}}), {0}, params), std::invalid_argument);
    std::vector<std::vector<double>> wz{{1.0, 0.0}, {0.0, 0.0}};
    params.weight = to_tensor(wz);
    CHECK_THROWS_AS(arcface_loss(to_tensor(h), {0}, params), std::invalid_argument);
    params.weight = to_tensor(w);
    CHECK_THROWS_AS(arcface_loss(to_tensor(h), {5}, params), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(31337);
    const double step = 1e-4;

    SUBCASE("contrastive loss w.r.t. embeddings") {
        for (int trial = 0; trial < 25; ++trial) {
            const int n = 4 + static_cast<int>(rng.uniform_int(0, 2));
            const int d = 2 + static_cast<int>(rng.uniform_int(0, 3));
            auto rows = random_rows(rng, n, d);
            std::vector<int> labels(static_cast<size_t>(n));
            for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
            const double tau = rng.uniform(0.1, 0.8);

            Tensor z = to_tensor(rows);
            Tensor grad;
            cl_meta_loss(z, labels, tau, &grad);

            double num = 0.0, den = 0.0;
            for (size_t i = 0; i < z.numel(); ++i) {
                Tensor zp = z, zm = z;
                zp[i] += step;
                zm[i] -= step;
                const double fd =
                    (cl_meta_loss(zp, labels, tau) - cl_meta_loss(zm, labels, tau)) / (2.0 * step);
                num += (grad[i] - fd) * (grad[i] - fd);
                den += fd * fd;
            }
            CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-12) < 1e-4);
        }
    }

    SUBCASE("angular-margin loss w.r.t. latents and weights") {
        for (int trial = 0; trial < 25; ++trial) {
            const int n = 2 + static_cast<int>(rng.uniform_int(0, 2));
            const int c = 3;
            const int d = 4;
            auto hrows = random_rows(rng, n, d);
            auto wrows = random_rows(rng, c, d);
            std::vector<int> labels(static_cast<size_t>(n));
            for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, c - 1));

            ArcFaceParams params;
            params.weight = to_tensor(wrows);
            params.margin = rng.uniform(0.1, 1.0);
            params.scale = rng.uniform(5.0, 30.0);

            Tensor h = to_tensor(hrows);
            Tensor gh, gw;
            arcface_loss(h, labels, params, &gh, &gw);

            double num = 0.0, den = 0.0;
            for (size_t i = 0; i < h.numel(); ++i) {
                Tensor hp = h, hm = h;
                hp[i] += step;
                hm[i] -= step;
                const double fd = (arcface_loss(hp, labels, params) -
                                   arcface_loss(hm, labels, params)) / (2.0 * step);
                num += (gh[i] - fd) * (gh[i] - fd);
                den += fd * fd;
            }
            for (size_t i = 0; i < params.weight.numel(); ++i) {
                ArcFaceParams pp = params, pm = params;
                pp.weight[i] += step;
                pm.weight[i] -= step;
                const double fd =
                    (arcface_loss(h, labels, pp) - arcface_loss(h, labels, pm)) / (2.0 * step);
                num += (gw[i] - fd) * (gw[i] - fd);
                den += fd * fd;
            }
            CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-12) < 1e-4);
        }
    }
}

TEST_CASE("log_softmax_at matches the naive softmax") {
    std::vector<double> logits{2.0, 1.0, 0.0};
    CHECK(-log_softmax_at(logits, 0) ==
          doctest::Approx(oracle::neg_log_softmax(logits, 0)).epsilon(1e-12));
    CHECK(-log_softmax_at(logits, 0) == doctest::Approx(0.40761).epsilon(1e-4));
}
