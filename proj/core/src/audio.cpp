#include "clpscf/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace clpscf {

namespace {

uint32_t rd_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xfffe;

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open WAV file: " + path.string());

    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("not a RIFF/WAVE file: " + path.string());
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    size_t data_off = 0, data_len = 0;

    // Chunk walk; fmt must precede data per the spec, tolerate any other
    // chunks (LIST, fact, ...) in between.
    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        uint32_t len = rd_u32(bytes.data() + pos + 4);
        size_t body = pos + 8;
        if (body + len > bytes.size()) len = static_cast<uint32_t>(bytes.size() - body);
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            format = rd_u16(bytes.data() + body);
            channels = rd_u16(bytes.data() + body + 2);
            sample_rate = rd_u32(bytes.data() + body + 4);
            bits = rd_u16(bytes.data() + body + 14);
            if (format == kFormatExtensible && len >= 40) {
                // First two bytes of the SubFormat GUID carry the code.
                format = rd_u16(bytes.data() + body + 24);
            }
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = body;
            data_len = len;
            break;
        }
        pos = body + len + (len & 1);  // chunks are word aligned
    }

    if (channels == 0 || sample_rate == 0 || data_off == 0) {
        throw std::runtime_error("malformed WAV file: " + path.string());
    }

    const size_t bytes_per_sample = bits / 8;
    if (bytes_per_sample == 0) throw std::runtime_error("malformed WAV bit depth: " + path.string());
    const size_t frame_size = bytes_per_sample * channels;
    const size_t frames = data_len / frame_size;
    if (frames == 0) throw std::runtime_error("WAV file has no audio frames: " + path.string());

    Waveform out;
    out.sample_rate = static_cast<int>(sample_rate);
    out.samples.resize(frames);

    const unsigned char* d = bytes.data() + data_off;
    for (size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
            const unsigned char* s = d + f * frame_size + c * bytes_per_sample;
            double v = 0.0;
            if (format == kFormatPcm && bits == 16) {
                int16_t raw;
                std::memcpy(&raw, s, 2);
                v = static_cast<double>(raw) / 32768.0;
            } else if (format == kFormatPcm && bits == 24) {
                int32_t raw = static_cast<int32_t>(s[0]) | (static_cast<int32_t>(s[1]) << 8) |
                              (static_cast<int32_t>(static_cast<int8_t>(s[2])) << 16);
                v = static_cast<double>(raw) / 8388608.0;
            } else if (format == kFormatPcm && bits == 32) {
                int32_t raw;
                std::memcpy(&raw, s, 4);
                v = static_cast<double>(raw) / 2147483648.0;
            } else if (format == kFormatFloat && bits == 32) {
                float raw;
                std::memcpy(&raw, s, 4);
                v = static_cast<double>(raw);
            } else if (format == kFormatFloat && bits == 64) {
                double raw;
                std::memcpy(&raw, s, 8);
                v = raw;
            } else {
                throw std::runtime_error("unsupported WAV encoding (format=" +
                                         std::to_string(format) + ", bits=" + std::to_string(bits) +
                                         "): " + path.string());
            }
            acc += v;
        }
        out.samples[f] = acc / static_cast<double>(channels);
    }
    return out;
}

void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, int sample_rate) {
    if (sample_rate <= 0) throw std::invalid_argument("write_wav_pcm16: sample_rate must be > 0");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());

    const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
    os.write("RIFF", 4);
    wr_u32(os, 36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    wr_u32(os, 16);
    wr_u16(os, kFormatPcm);
    wr_u16(os, 1);  // mono
    wr_u32(os, static_cast<uint32_t>(sample_rate));
    wr_u32(os, static_cast<uint32_t>(sample_rate) * 2);
    wr_u16(os, 2);
    wr_u16(os, 16);
    os.write("data", 4);
    wr_u32(os, data_len);
    for (double x : samples) {
        double c = std::clamp(x, -1.0, 1.0);
        auto q = static_cast<int32_t>(std::lrint(c * 32767.0));
        q = std::clamp<int32_t>(q, -32768, 32767);
        auto raw = static_cast<int16_t>(q);
        char b[2];
        std::memcpy(b, &raw, 2);
        os.write(b, 2);
    }
    if (!os) throw std::runtime_error("short write: " + path.string());
}

std::vector<double> resample_linear(const std::vector<double>& samples,
                                    int sr_in, int sr_out) {
    if (sr_in <= 0 || sr_out <= 0) throw std::invalid_argument("resample_linear: rates must be > 0");
    if (sr_in == sr_out || samples.empty()) return samples;
    const size_t n_out = static_cast<size_t>(
        std::llround(static_cast<double>(samples.size()) * sr_out / sr_in));
    std::vector<double> out(std::max<size_t>(n_out, 1));
    const double step = static_cast<double>(sr_in) / sr_out;
    for (size_t i = 0; i < out.size(); ++i) {
        const double t = static_cast<double>(i) * step;
        const size_t i0 = std::min(static_cast<size_t>(t), samples.size() - 1);
        const size_t i1 = std::min(i0 + 1, samples.size() - 1);
        const double frac = t - static_cast<double>(i0);
        out[i] = samples[i0] * (1.0 - frac) + samples[i1] * frac;
    }
    return out;
}

std::vector<double> fix_length(std::vector<double> samples, size_t n) {
    samples.resize(n, 0.0);
    return samples;
}

}  // namespace clpscf
