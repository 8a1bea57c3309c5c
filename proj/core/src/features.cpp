#include "clpscf/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "clpscf/hash.hpp"

namespace clpscf {

namespace {

bool is_pow2(int x) { return x > 0 && (x & (x - 1)) == 0; }

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

void FeatureConfig::validate() const {
    if (!is_pow2(n_fft)) throw std::invalid_argument("FeatureConfig: n_fft must be a power of two");
    if (hop < 1 || hop > n_fft) throw std::invalid_argument("FeatureConfig: need 1 <= hop <= n_fft");
    if (mel_bins < 1) throw std::invalid_argument("FeatureConfig: mel_bins must be >= 1");
    if (sample_rate <= 0) throw std::invalid_argument("FeatureConfig: sample_rate must be > 0");
    if (!(log_floor > 0.0)) throw std::invalid_argument("FeatureConfig: log_floor must be > 0");
}

std::string FeatureConfig::hash() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "n_fft=%d;hop=%d;mel_bins=%d;sample_rate=%d;log_floor=%.17g",
                  n_fft, hop, mel_bins, sample_rate, log_floor);
    return fnv1a64_hex(buf);
}

int num_frames(size_t n, const FeatureConfig& cfg) {
    cfg.validate();
    if (n < static_cast<size_t>(cfg.n_fft)) {
        throw std::invalid_argument("waveform shorter than one analysis frame (" +
                                    std::to_string(n) + " < " + std::to_string(cfg.n_fft) + ")");
    }
    return 1 + static_cast<int>((n - static_cast<size_t>(cfg.n_fft)) /
                                static_cast<size_t>(cfg.hop));
}

void fft_inplace(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<double> stft_power(const std::vector<double>& samples, const FeatureConfig& cfg) {
    const int T = num_frames(samples.size(), cfg);
    const int n_bins = cfg.n_fft / 2 + 1;

    std::vector<double> window(static_cast<size_t>(cfg.n_fft));
    for (int i = 0; i < cfg.n_fft; ++i) {
        window[static_cast<size_t>(i)] =
            0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);
    }

    std::vector<double> power(static_cast<size_t>(n_bins) * T);
    std::vector<std::complex<double>> frame(static_cast<size_t>(cfg.n_fft));
    for (int t = 0; t < T; ++t) {
        const size_t off = static_cast<size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) {
            frame[static_cast<size_t>(i)] = samples[off + static_cast<size_t>(i)] *
                                            window[static_cast<size_t>(i)];
        }
        fft_inplace(frame);
        for (int b = 0; b < n_bins; ++b) {
            power[static_cast<size_t>(b) * T + t] = std::norm(frame[static_cast<size_t>(b)]);
        }
    }
    return power;
}

std::vector<double> mel_filterbank(const FeatureConfig& cfg) {
    cfg.validate();
    const int n_bins = cfg.n_fft / 2 + 1;
    const int M = cfg.mel_bins;
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(cfg.sample_rate / 2.0);

    std::vector<double> edges(static_cast<size_t>(M) + 2);
    for (int k = 0; k < M + 2; ++k) {
        edges[static_cast<size_t>(k)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * k / (M + 1));
    }

    std::vector<double> fb(static_cast<size_t>(M) * n_bins, 0.0);
    const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
    for (int m = 0; m < M; ++m) {
        const double lo = edges[static_cast<size_t>(m)];
        const double mid = edges[static_cast<size_t>(m) + 1];
        const double hi = edges[static_cast<size_t>(m) + 2];
        for (int b = 0; b < n_bins; ++b) {
            const double f = b * bin_hz;
            double w = 0.0;
            if (f > lo && f < mid) {
                w = (f - lo) / (mid - lo);
            } else if (f == mid) {
                w = 1.0;
            } else if (f > mid && f < hi) {
                w = (hi - f) / (hi - mid);
            }
            fb[static_cast<size_t>(m) * n_bins + b] = w;
        }
    }
    return fb;
}

double mel_center_freq(const FeatureConfig& cfg, int bin) {
    if (bin < 0 || bin >= cfg.mel_bins) throw std::out_of_range("mel_center_freq: bin out of range");
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(cfg.sample_rate / 2.0);
    return mel_to_hz(mel_lo + (mel_hi - mel_lo) * (bin + 1) / (cfg.mel_bins + 1));
}

LogMelSpec log_mel(const std::vector<double>& samples, int sample_rate,
                   const FeatureConfig& cfg) {
    cfg.validate();
    if (sample_rate != cfg.sample_rate) {
        throw std::invalid_argument("log_mel: clip sample rate " + std::to_string(sample_rate) +
                                    " != configured " + std::to_string(cfg.sample_rate));
    }
    const int T = num_frames(samples.size(), cfg);
    const int n_bins = cfg.n_fft / 2 + 1;
    const std::vector<double> power = stft_power(samples, cfg);
    const std::vector<double> fb = mel_filterbank(cfg);

    LogMelSpec out;
    out.mel_bins = cfg.mel_bins;
    out.frames = T;
    out.config_hash = cfg.hash();
    out.values.assign(static_cast<size_t>(cfg.mel_bins) * T, 0.0);
    for (int m = 0; m < cfg.mel_bins; ++m) {
        const double* w = fb.data() + static_cast<size_t>(m) * n_bins;
        for (int t = 0; t < T; ++t) {
            double e = 0.0;
            for (int b = 0; b < n_bins; ++b) {
                e += w[b] * power[static_cast<size_t>(b) * T + t];
            }
            out.values[static_cast<size_t>(m) * T + t] = std::log(std::max(e, cfg.log_floor));
        }
    }
    return out;
}

LogMelSpec log_mel(const AudioClip& clip, const FeatureConfig& cfg) {
    if (clip.samples.empty()) throw std::invalid_argument("log_mel: clip has no samples");
    return log_mel(clip.samples, clip.sample_rate, cfg);
}

std::pair<int, int> tgram_shape_contract(size_t waveform_length, const FeatureConfig& cfg) {
    return {cfg.mel_bins, num_frames(waveform_length, cfg)};
}

}  // namespace clpscf
