#include "clpscf/feature_cache.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "clpscf/hash.hpp"

namespace clpscf {

namespace {
constexpr char kMagic[8] = {'C', 'L', 'P', 'S', 'C', 'F', 'F', 'M'};
}

FeatureCache::FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path FeatureCache::entry_path(const std::string& clip_path,
                                               const std::string& cfg_hash) const {
    return dir_ / (fnv1a64_hex(clip_path + "|" + cfg_hash) + ".fmat");
}

std::optional<LogMelSpec> FeatureCache::lookup(const std::string& clip_path,
                                               const FeatureConfig& cfg) const {
    const std::string cfg_hash = cfg.hash();
    std::ifstream in(entry_path(clip_path, cfg_hash), std::ios::binary);
    if (!in) return std::nullopt;

    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) return std::nullopt;
    uint64_t json_len = 0;
    in.read(reinterpret_cast<char*>(&json_len), 8);
    if (!in || json_len > (1u << 20)) return std::nullopt;
    std::string header(json_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(json_len));
    if (!in) return std::nullopt;

    nlohmann::json j = nlohmann::json::parse(header, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    // Reject hash collisions: the header records the real key.
    if (j.value("path", "") != clip_path || j.value("config_hash", "") != cfg_hash) {
        return std::nullopt;
    }

    LogMelSpec spec;
    spec.mel_bins = j.value("mel_bins", 0);
    spec.frames = j.value("frames", 0);
    spec.config_hash = cfg_hash;
    if (spec.mel_bins <= 0 || spec.frames <= 0) return std::nullopt;
    spec.values.resize(static_cast<size_t>(spec.mel_bins) * spec.frames);
    in.read(reinterpret_cast<char*>(spec.values.data()),
            static_cast<std::streamsize>(spec.values.size() * sizeof(double)));
    if (!in) return std::nullopt;
    return spec;
}

void FeatureCache::store(const std::string& clip_path, const FeatureConfig& cfg,
                         const LogMelSpec& spec) const {
    const std::string cfg_hash = cfg.hash();
    nlohmann::json j;
    j["path"] = clip_path;
    j["config_hash"] = cfg_hash;
    j["mel_bins"] = spec.mel_bins;
    j["frames"] = spec.frames;
    j["dtype"] = "f64";
    const std::string header = j.dump();

    const auto path = entry_path(clip_path, cfg_hash);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) return;  // cache is best-effort
        os.write(kMagic, 8);
        const uint64_t json_len = header.size();
        os.write(reinterpret_cast<const char*>(&json_len), 8);
        os.write(header.data(), static_cast<std::streamsize>(header.size()));
        os.write(reinterpret_cast<const char*>(spec.values.data()),
                 static_cast<std::streamsize>(spec.values.size() * sizeof(double)));
        if (!os) return;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
}

}  // namespace clpscf
