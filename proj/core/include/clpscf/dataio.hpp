#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clpscf/audio.hpp"

namespace clpscf {

enum class Condition { normal, anomalous, unknown };
enum class Split { train, test };

const char* to_string(Condition c);
const char* to_string(Split s);

// One audio clip plus its machine metadata. `samples` may be empty for
// clips scanned from disk; call load_waveform() to materialize them.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 0;
    std::string machine_type;
    int machine_id = -1;
    Condition condition = Condition::unknown;
    Split split = Split::train;
    std::string source_path;
};

// Bijection between (machine_type, machine_id) pairs and class indices
// 0..C-1, ordered lexicographically by type then id.
class LabelSpace {
public:
    LabelSpace() = default;
    explicit LabelSpace(std::vector<std::pair<std::string, int>> entries);

    static LabelSpace from_clips(const std::vector<AudioClip>& clips);

    int index_of(const std::string& machine_type, int machine_id) const;
    std::optional<int> try_index_of(const std::string& machine_type, int machine_id) const;
    const std::pair<std::string, int>& entry(int index) const;
    const std::vector<std::pair<std::string, int>>& entries() const { return entries_; }
    int size() const { return static_cast<int>(entries_.size()); }

    bool operator==(const LabelSpace& other) const { return entries_ == other.entries_; }

private:
    std::vector<std::pair<std::string, int>> entries_;
    std::map<std::pair<std::string, int>, int> index_;
};

// Parsed fields of a `{normal|anomaly}_id_XX_*.wav` basename.
struct ParsedName {
    Condition condition;
    int machine_id;
};

std::optional<ParsedName> parse_dcase_name(const std::string& filename);

struct ScanResult {
    std::vector<AudioClip> clips;
    size_t skipped = 0;                  // files with unparseable names
    std::vector<std::string> warnings;   // one line per skipped file
};

// Walks `<root>/<machine_type>/{train,test}/*.wav`, parsing machine id
// and condition from filenames. Sample rates are read from the WAV
// headers; waveforms are left unloaded. Throws when the root is missing
// or no clip could be parsed.
ScanResult scan_dataset(const std::filesystem::path& root);

// Convenience: scan several roots (e.g. a dev tree plus an additional
// training tree) and merge the results.
ScanResult scan_dataset(const std::vector<std::filesystem::path>& roots);

// Materializes clip.samples: decodes from source_path when empty,
// resamples to target_sr, truncates/zero-pads to fixed_samples (skipped
// when fixed_samples == 0).
void load_waveform(AudioClip& clip, int target_sr, size_t fixed_samples);

// Line-delimited manifest, one record per clip:
//   path<TAB>machine_type<TAB>machine_id<TAB>condition<TAB>split
void write_manifest(const std::filesystem::path& path, const std::vector<AudioClip>& clips);
std::vector<AudioClip> read_manifest(const std::filesystem::path& path);

}  // namespace clpscf
