#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "clpscf/features.hpp"

namespace clpscf {

// On-disk log-mel cache keyed by (clip path, feature config hash). Each
// entry is a small binary matrix container with a JSON header. Purely an
// optimization: a hit returns exactly what log_mel would compute.
class FeatureCache {
public:
    explicit FeatureCache(std::filesystem::path dir);

    std::optional<LogMelSpec> lookup(const std::string& clip_path,
                                     const FeatureConfig& cfg) const;
    void store(const std::string& clip_path, const FeatureConfig& cfg,
               const LogMelSpec& spec) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path entry_path(const std::string& clip_path,
                                     const std::string& cfg_hash) const;
    std::filesystem::path dir_;
};

}  // namespace clpscf
