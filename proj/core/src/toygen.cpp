#include "clpscf/toygen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <stdexcept>

#include "clpscf/rng.hpp"

namespace clpscf {

namespace {

constexpr double kBaseAmplitude = 0.2;
constexpr double kNoiseDb = -30.0;        // noise floor relative to the base tone
constexpr double kAnomalyGainDb = -6.0;   // detuned tone level relative to the base tone
constexpr double kFundamentalLo = 200.0;

// Keep the third harmonic safely under Nyquist.
double fundamental_hi(int sample_rate) {
    return std::min(2000.0, sample_rate / 6.4);
}

uint64_t clip_stream_tag(int type_idx, int id, Split split, int clip_idx) {
    uint64_t tag = static_cast<uint64_t>(type_idx) * 1009 + static_cast<uint64_t>(id);
    tag = tag * 4 + (split == Split::train ? 0 : 1);
    return tag * 1000003 + static_cast<uint64_t>(clip_idx);
}

std::string type_name(int type_idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "toy%02d", type_idx);
    return buf;
}

std::vector<double> synth_clip(const ToySpec& spec, int type_idx, int id, Split split,
                               int clip_idx, bool anomalous) {
    const size_t n = static_cast<size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
    const double f0 = toy_fundamental(spec, type_idx, id);

    // Per-machine signature: overtone gains drawn from a machine stream.
    Rng machine_rng(mix_seed(spec.seed, static_cast<uint64_t>(type_idx) * 1009 +
                                            static_cast<uint64_t>(id) + 0xabcdULL));
    const double g2 = machine_rng.uniform(0.3, 0.8);
    const double g3 = machine_rng.uniform(0.2, 0.6);

    // Per-clip stream: phases, amplitude jitter, noise.
    Rng rng(mix_seed(spec.seed, clip_stream_tag(type_idx, id, split, clip_idx)));
    const double amp = kBaseAmplitude * rng.uniform(0.8, 1.2);
    const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double p3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double p_anom = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double noise = amp * std::pow(10.0, kNoiseDb / 20.0);
    const double anom_gain = anomalous ? amp * std::pow(10.0, kAnomalyGainDb / 20.0) : 0.0;

    const double w = 2.0 * std::numbers::pi * f0 / spec.sample_rate;
    std::vector<double> x(n);
    for (size_t t = 0; t < n; ++t) {
        const double td = static_cast<double>(t);
        double v = std::sin(w * td + p1) + g2 * std::sin(2.0 * w * td + p2) +
                   g3 * std::sin(3.0 * w * td + p3);
        v *= amp;
        if (anomalous) v += anom_gain * std::sin(1.5 * w * td + p_anom);
        v += noise * rng.normal();
        x[t] = v;
    }
    return x;
}

AudioClip make_clip(const ToySpec& spec, int type_idx, int id, Split split, int clip_idx,
                    bool anomalous) {
    AudioClip clip;
    clip.samples = synth_clip(spec, type_idx, id, split, clip_idx, anomalous);
    clip.sample_rate = spec.sample_rate;
    clip.machine_type = type_name(type_idx);
    clip.machine_id = id;
    clip.condition = anomalous ? Condition::anomalous : Condition::normal;
    clip.split = split;
    return clip;
}

}  // namespace

void ToySpec::validate() const {
    if (num_types < 1 || ids_per_type < 1 || clips_per_id < 1) {
        throw std::invalid_argument("ToySpec: counts must be >= 1");
    }
    if (!(clip_seconds > 0.0)) throw std::invalid_argument("ToySpec: clip_seconds must be > 0");
    if (sample_rate < 1600) throw std::invalid_argument("ToySpec: sample_rate too low");
    if (anomaly_fraction_test < 0.0 || anomaly_fraction_test > 1.0) {
        throw std::invalid_argument("ToySpec: anomaly_fraction_test must lie in [0, 1]");
    }
}

double toy_fundamental(const ToySpec& spec, int type_idx, int id) {
    const int k = type_idx * spec.ids_per_type + id;
    const int total = spec.num_types * spec.ids_per_type;
    const double hi = fundamental_hi(spec.sample_rate);
    return kFundamentalLo *
           std::pow(hi / kFundamentalLo, (static_cast<double>(k) + 0.5) / total);
}

ToyDataset generate_toy_dataset(const ToySpec& spec) {
    spec.validate();
    ToyDataset out;
    const int n_anom = static_cast<int>(std::lround(spec.clips_per_id * spec.anomaly_fraction_test));
    for (int t = 0; t < spec.num_types; ++t) {
        for (int id = 0; id < spec.ids_per_type; ++id) {
            for (int c = 0; c < spec.clips_per_id; ++c) {
                out.train.push_back(make_clip(spec, t, id, Split::train, c, false));
            }
            for (int c = 0; c < spec.clips_per_id; ++c) {
                const bool anomalous = c >= spec.clips_per_id - n_anom;
                out.test.push_back(make_clip(spec, t, id, Split::test, c, anomalous));
            }
        }
    }
    return out;
}

ToyDataset write_toy_dataset(const ToySpec& spec, const std::filesystem::path& out_dir) {
    ToyDataset ds = generate_toy_dataset(spec);
    namespace fs = std::filesystem;
    char name[64];

    auto write_split = [&](std::vector<AudioClip>& clips, const char* split_dir) {
        std::map<std::pair<std::string, int>, int> seq;
        for (auto& clip : clips) {
            const fs::path dir = out_dir / clip.machine_type / split_dir;
            fs::create_directories(dir);
            const int k = seq[{clip.machine_type, clip.machine_id}]++;
            std::snprintf(name, sizeof(name), "%s_id_%02d_%08d.wav",
                          clip.condition == Condition::anomalous ? "anomaly" : "normal",
                          clip.machine_id, k);
            const fs::path p = dir / name;
            write_wav_pcm16(p, clip.samples, clip.sample_rate);
            clip.source_path = p.string();
        }
    };
    write_split(ds.train, "train");
    write_split(ds.test, "test");

    std::vector<AudioClip> all;
    all.reserve(ds.train.size() + ds.test.size());
    all.insert(all.end(), ds.train.begin(), ds.train.end());
    all.insert(all.end(), ds.test.begin(), ds.test.end());
    write_manifest(out_dir / "manifest.tsv", all);
    return ds;
}

}  // namespace clpscf
