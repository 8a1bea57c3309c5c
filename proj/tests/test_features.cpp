#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "clpscf/feature_cache.hpp"
#include "clpscf/features.hpp"
#include "clpscf/rng.hpp"
#include "oracles.hpp"

using namespace clpscf;

namespace {

FeatureConfig small_cfg() {
    FeatureConfig cfg;
    cfg.n_fft = 256;
    cfg.hop = 128;
    cfg.mel_bins = 32;
    cfg.sample_rate = 8000;
    return cfg;
}

std::vector<double> sine(double freq, double amp, int sample_rate, size_t n) {
    std::vector<double> x(n);
    for (size_t t = 0; t < n; ++t) {
        x[t] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / sample_rate);
    }
    return x;
}

}  // namespace

TEST_CASE("FeatureConfig validation") {
    FeatureConfig cfg = small_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.n_fft = 300;  // not a power of two
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_cfg();
    cfg.hop = cfg.n_fft + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_cfg();
    cfg.mel_bins = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_cfg();
    cfg.log_floor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("frame count formula") {
    FeatureConfig cfg;  // 1024 / 512 defaults
    CHECK(num_frames(160000, cfg) == 311);
    CHECK(num_frames(1024, cfg) == 1);
    CHECK(num_frames(1535, cfg) == 1);
    CHECK(num_frames(1536, cfg) == 2);
    CHECK_THROWS_AS(num_frames(1023, cfg), std::invalid_argument);
}

TEST_CASE("all-zero waveform maps to a constant log-floor matrix") {
    FeatureConfig cfg = small_cfg();
    std::vector<double> silence(8000, 0.0);
    LogMelSpec spec = log_mel(silence, cfg.sample_rate, cfg);
    CHECK(spec.mel_bins == 32);
    CHECK(spec.frames == num_frames(silence.size(), cfg));
    const double expected = std::log(cfg.log_floor);
    for (double v : spec.values) CHECK(v == expected);
}

TEST_CASE("log_mel rejects bad inputs") {
    FeatureConfig cfg = small_cfg();
    std::vector<double> x(100, 0.1);  // shorter than n_fft
    CHECK_THROWS_AS(log_mel(x, cfg.sample_rate, cfg), std::invalid_argument);
    std::vector<double> ok(4096, 0.1);
    CHECK_THROWS_AS(log_mel(ok, 16000, cfg), std::invalid_argument);  // rate mismatch
}

TEST_CASE("pure sine at a mel filter's peak frequency wins that bin") {
    FeatureConfig cfg = small_cfg();
    const std::vector<double> fb = mel_filterbank(cfg);
    const int n_bins = cfg.n_fft / 2 + 1;

    for (int target : {12, 16, 20, 24, 28}) {
        const double freq = mel_center_freq(cfg, target);
        auto wave = sine(freq, 0.5, cfg.sample_rate, 8000);
        LogMelSpec spec = log_mel(wave, cfg.sample_rate, cfg);

        const int mid = spec.frames / 2;
        int best = 0;
        for (int m = 1; m < spec.mel_bins; ++m) {
            if (spec.at(m, mid) > spec.at(best, mid)) best = m;
        }
        CHECK(best == target);

        // Independent oracle: naive DFT power of the same frame dotted
        // with the filterbank rows.
        std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
        const size_t off = static_cast<size_t>(mid) * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);
            frame[static_cast<size_t>(i)] = wave[off + static_cast<size_t>(i)] * w;
        }
        const auto power = oracle::dft_power(frame);
        int oracle_best = 0;
        double oracle_best_val = -1.0;
        for (int m = 0; m < cfg.mel_bins; ++m) {
            double e = 0.0;
            for (int b = 0; b < n_bins; ++b) {
                e += fb[static_cast<size_t>(m) * n_bins + b] * power[static_cast<size_t>(b)];
            }
            if (e > oracle_best_val) {
                oracle_best_val = e;
                oracle_best = m;
            }
        }
        CHECK(oracle_best == target);
    }
}

TEST_CASE("log_mel matches a naive DFT + filterbank oracle entry-wise") {
    FeatureConfig cfg = small_cfg();
    Rng rng(99);
    std::vector<double> wave(2048);
    for (auto& v : wave) v = rng.uniform(-0.5, 0.5);
    LogMelSpec spec = log_mel(wave, cfg.sample_rate, cfg);

    const std::vector<double> fb = mel_filterbank(cfg);
    const int n_bins = cfg.n_fft / 2 + 1;
    for (int t = 0; t < spec.frames; ++t) {
        std::vector<double> frame(static_cast<size_t>(cfg.n_fft));
        for (int i = 0; i < cfg.n_fft; ++i) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);
            frame[static_cast<size_t>(i)] =
                wave[static_cast<size_t>(t) * cfg.hop + static_cast<size_t>(i)] * w;
        }
        const auto power = oracle::dft_power(frame);
        for (int m = 0; m < cfg.mel_bins; m += 7) {
            double e = 0.0;
            for (int b = 0; b < n_bins; ++b) {
                e += fb[static_cast<size_t>(m) * n_bins + b] * power[static_cast<size_t>(b)];
            }
            const double expected = std::log(std::max(e, cfg.log_floor));
            CHECK(spec.at(m, t) == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("doubling the amplitude adds exactly log(4) above the floor") {
    FeatureConfig cfg = small_cfg();
    auto wave = sine(440.0, 0.25, cfg.sample_rate, 4096);
    auto doubled = wave;
    for (auto& v : doubled) v *= 2.0;

    LogMelSpec a = log_mel(wave, cfg.sample_rate, cfg);
    LogMelSpec b = log_mel(doubled, cfg.sample_rate, cfg);
    const double floor_val = std::log(cfg.log_floor);
    const double log4 = std::log(4.0);
    for (size_t i = 0; i < a.values.size(); ++i) {
        if (a.values[i] > floor_val + 2.0 && b.values[i] > floor_val) {
            CHECK(b.values[i] - a.values[i] == doctest::Approx(log4).epsilon(1e-12));
        }
    }
}

TEST_CASE("log_mel is deterministic") {
    FeatureConfig cfg = small_cfg();
    Rng rng(5);
    std::vector<double> wave(4000);
    for (auto& v : wave) v = rng.uniform(-1.0, 1.0);
    LogMelSpec a = log_mel(wave, cfg.sample_rate, cfg);
    LogMelSpec b = log_mel(wave, cfg.sample_rate, cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("temporal branch shape contract equals the log-mel shape") {
    FeatureConfig cfg;  // defaults: 1024/512/128/16000
    CHECK(tgram_shape_contract(160000, cfg) == std::pair<int, int>{128, 311});
    CHECK(tgram_shape_contract(1024, cfg) == std::pair<int, int>{128, 1});

    FeatureConfig small = small_cfg();
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t len = 256 + rng.index(20000);
        std::vector<double> wave(len);
        for (auto& v : wave) v = rng.uniform(-0.3, 0.3);
        const auto [mel, frames] = tgram_shape_contract(len, small);
        LogMelSpec spec = log_mel(wave, small.sample_rate, small);
        CHECK(mel == spec.mel_bins);
        CHECK(frames == spec.frames);
    }
    CHECK_THROWS_AS(tgram_shape_contract(100, small), std::invalid_argument);
}

TEST_CASE("fft agrees with the naive DFT") {
    Rng rng(7);
    std::vector<std::complex<double>> a(64);
    std::vector<double> re(64);
    for (size_t i = 0; i < a.size(); ++i) {
        re[i] = rng.uniform(-1.0, 1.0);
        a[i] = re[i];
    }
    fft_inplace(a);
    const auto power = oracle::dft_power(re);
    for (size_t k = 0; k <= 32; ++k) {
        CHECK(std::norm(a[k]) == doctest::Approx(power[k]).epsilon(1e-9));
    }
    std::vector<std::complex<double>> bad(3);
    CHECK_THROWS_AS(fft_inplace(bad), std::invalid_argument);
}

TEST_CASE("feature cache round-trips exactly and is keyed on path + config") {
    FeatureConfig cfg = small_cfg();
    auto wave = sine(700.0, 0.4, cfg.sample_rate, 4000);
    LogMelSpec spec = log_mel(wave, cfg.sample_rate, cfg);

    const auto dir = std::filesystem::temp_directory_path() / "clpscf_cache_test";
    std::filesystem::remove_all(dir);
    FeatureCache cache(dir);
    CHECK(!cache.lookup("clip_a.wav", cfg).has_value());
    cache.store("clip_a.wav", cfg, spec);

    auto hit = cache.lookup("clip_a.wav", cfg);
    REQUIRE(hit.has_value());
    CHECK(hit->values == spec.values);
    CHECK(hit->mel_bins == spec.mel_bins);
    CHECK(hit->frames == spec.frames);

    CHECK(!cache.lookup("clip_b.wav", cfg).has_value());
    FeatureConfig other = cfg;
    other.mel_bins = 16;
    CHECK(!cache.lookup("clip_a.wav", other).has_value());
    std::filesystem::remove_all(dir);
}
