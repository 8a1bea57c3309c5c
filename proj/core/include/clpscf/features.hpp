#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "clpscf/dataio.hpp"

namespace clpscf {

struct FeatureConfig {
    int n_fft = 1024;       // power of two
    int hop = 512;
    int mel_bins = 128;
    int sample_rate = 16000;
    double log_floor = 1e-10;  // floor on mel power before the log

    void validate() const;
    std::string hash() const;
};

// Log-mel spectrogram, natural-log scale, row-major M x T.
struct LogMelSpec {
    std::vector<double> values;  // mel_bins * frames
    int mel_bins = 0;
    int frames = 0;
    std::string config_hash;

    double at(int m, int t) const { return values[static_cast<size_t>(m) * frames + t]; }
};

// Frame count for a waveform of length `n`: 1 + floor((n - n_fft) / hop),
// no padding. Throws when the waveform is shorter than one frame.
int num_frames(size_t n, const FeatureConfig& cfg);

// Triangular mel filterbank, unit peak, HTK mel scale, spanning
// [0, sample_rate/2]. Row-major mel_bins x (n_fft/2 + 1).
std::vector<double> mel_filterbank(const FeatureConfig& cfg);

// Peak frequency (Hz) of mel filter `bin`.
double mel_center_freq(const FeatureConfig& cfg, int bin);

// Hann-windowed power spectrogram, row-major (n_fft/2 + 1) x frames.
std::vector<double> stft_power(const std::vector<double>& samples, const FeatureConfig& cfg);

// Power STFT -> mel filterbank -> max(power, log_floor) -> natural log.
LogMelSpec log_mel(const std::vector<double>& samples, int sample_rate,
                   const FeatureConfig& cfg);
LogMelSpec log_mel(const AudioClip& clip, const FeatureConfig& cfg);

// Shape the learned temporal feature must produce for a waveform of the
// given length: (mel_bins, frames), matching log_mel exactly.
std::pair<int, int> tgram_shape_contract(size_t waveform_length, const FeatureConfig& cfg);

// In-place radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

}  // namespace clpscf
