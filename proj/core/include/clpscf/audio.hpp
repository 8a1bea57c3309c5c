#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace clpscf {

// Mono waveform in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 0;
};

// Reads a RIFF/WAVE file. Supported encodings: 16/24/32-bit integer PCM
// and 32/64-bit float, mono or multi-channel (channels are averaged).
Waveform read_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] before
// quantization so the output is a pure function of the input.
void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, int sample_rate);

// Linear-interpolation resampler. Identity when rates match.
std::vector<double> resample_linear(const std::vector<double>& samples,
                                    int sr_in, int sr_out);

// Truncates or zero-pads to exactly n samples.
std::vector<double> fix_length(std::vector<double> samples, size_t n);

}  // namespace clpscf
