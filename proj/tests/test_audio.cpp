#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "clpscf/audio.hpp"
#include "clpscf/rng.hpp"

using namespace clpscf;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    const auto d = fs::temp_directory_path() / "clpscf_audio_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("pcm16 write/read round trip within quantization error") {
    Rng rng(42);
    std::vector<double> samples(5000);
    for (auto& s : samples) s = rng.uniform(-0.9, 0.9);
    const auto p = tmp_dir() / "roundtrip.wav";
    write_wav_pcm16(p, samples, 16000);

    Waveform w = read_wav(p);
    CHECK(w.sample_rate == 16000);
    REQUIRE(w.samples.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(std::abs(w.samples[i] - samples[i]) < 1.0 / 32000.0);
    }
}

TEST_CASE("wav writes are deterministic") {
    std::vector<double> samples(100, 0.25);
    const auto a = tmp_dir() / "det_a.wav";
    const auto b = tmp_dir() / "det_b.wav";
    write_wav_pcm16(a, samples, 8000);
    write_wav_pcm16(b, samples, 8000);
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
}

TEST_CASE("multi-channel float wav is averaged to mono") {
    // Hand-rolled stereo float32 WAV: left = 0.5, right = -0.5.
    const auto p = tmp_dir() / "stereo_f32.wav";
    {
        std::ofstream os(p, std::ios::binary);
        auto u32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
        auto u16 = [&](uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
        const uint32_t frames = 50;
        os.write("RIFF", 4);
        u32(36 + frames * 8);
        os.write("WAVE", 4);
        os.write("fmt ", 4);
        u32(16);
        u16(3);  // float
        u16(2);  // stereo
        u32(8000);
        u32(8000 * 8);
        u16(8);
        u16(32);
        os.write("data", 4);
        u32(frames * 8);
        for (uint32_t i = 0; i < frames; ++i) {
            float l = 0.5f, r = -0.5f;
            os.write(reinterpret_cast<const char*>(&l), 4);
            os.write(reinterpret_cast<const char*>(&r), 4);
        }
    }
    Waveform w = read_wav(p);
    CHECK(w.sample_rate == 8000);
    REQUIRE(w.samples.size() == 50);
    for (double s : w.samples) CHECK(s == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("read_wav rejects garbage") {
    const auto p = tmp_dir() / "garbage.wav";
    {
        std::ofstream os(p, std::ios::binary);
        os << "this is not audio";
    }
    CHECK_THROWS_AS(read_wav(p), std::runtime_error);
    CHECK_THROWS_AS(read_wav(tmp_dir() / "missing.wav"), std::runtime_error);
}

TEST_CASE("linear resampling preserves a slow ramp") {
    std::vector<double> ramp(100);
    for (size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 100.0;
    auto up = resample_linear(ramp, 8000, 16000);
    CHECK(up.size() == 200);
    for (size_t i = 0; i + 2 < up.size(); ++i) {
        CHECK(up[i] <= up[i + 1] + 1e-12);  // still monotone
    }
    auto same = resample_linear(ramp, 8000, 8000);
    CHECK(same == ramp);
}

TEST_CASE("fix_length truncates and zero-pads") {
    std::vector<double> x{1.0, 2.0, 3.0};
    auto longer = fix_length(x, 5);
    CHECK(longer == std::vector<double>{1.0, 2.0, 3.0, 0.0, 0.0});
    auto shorter = fix_length(x, 2);
    CHECK(shorter == std::vector<double>{1.0, 2.0});
}
