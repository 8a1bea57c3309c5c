#include "clpscf/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace clpscf {

namespace fs = std::filesystem;

const char* to_string(Condition c) {
    switch (c) {
        case Condition::normal: return "normal";
        case Condition::anomalous: return "anomalous";
        default: return "unknown";
    }
}

const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

LabelSpace::LabelSpace(std::vector<std::pair<std::string, int>> entries)
    : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end());
    entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
    for (size_t i = 0; i < entries_.size(); ++i) {
        index_[entries_[i]] = static_cast<int>(i);
    }
}

LabelSpace LabelSpace::from_clips(const std::vector<AudioClip>& clips) {
    if (clips.empty()) throw std::invalid_argument("LabelSpace: empty clip list");
    std::vector<std::pair<std::string, int>> entries;
    entries.reserve(clips.size());
    for (const auto& c : clips) entries.emplace_back(c.machine_type, c.machine_id);
    return LabelSpace(std::move(entries));
}

int LabelSpace::index_of(const std::string& machine_type, int machine_id) const {
    auto it = index_.find({machine_type, machine_id});
    if (it == index_.end()) {
        throw std::out_of_range("LabelSpace: unknown machine " + machine_type + ":" +
                                std::to_string(machine_id));
    }
    return it->second;
}

std::optional<int> LabelSpace::try_index_of(const std::string& machine_type,
                                            int machine_id) const {
    auto it = index_.find({machine_type, machine_id});
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::pair<std::string, int>& LabelSpace::entry(int index) const {
    if (index < 0 || index >= size()) throw std::out_of_range("LabelSpace: index out of range");
    return entries_[static_cast<size_t>(index)];
}

std::optional<ParsedName> parse_dcase_name(const std::string& filename) {
    // Grammar: {normal|anomaly}_id_<digits>_<anything>.wav
    std::string stem = filename;
    auto dot = stem.rfind('.');
    if (dot == std::string::npos) return std::nullopt;
    std::string ext = stem.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext != "wav") return std::nullopt;
    stem = stem.substr(0, dot);

    Condition cond;
    size_t pos;
    if (stem.rfind("normal_id_", 0) == 0) {
        cond = Condition::normal;
        pos = 10;
    } else if (stem.rfind("anomaly_id_", 0) == 0) {
        cond = Condition::anomalous;
        pos = 11;
    } else {
        return std::nullopt;
    }

    size_t end = pos;
    while (end < stem.size() && std::isdigit(static_cast<unsigned char>(stem[end]))) ++end;
    if (end == pos) return std::nullopt;
    if (end < stem.size() && stem[end] != '_') return std::nullopt;
    return ParsedName{cond, std::stoi(stem.substr(pos, end - pos))};
}

namespace {

int wav_header_sample_rate(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return 0;
    unsigned char hdr[44];
    in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (in.gcount() < 36) return 0;
    // fmt chunk normally starts at offset 12; walk if it does not.
    size_t pos = 12;
    unsigned char buf[8];
    std::vector<unsigned char> head(hdr, hdr + 44);
    while (true) {
        if (pos + 8 <= head.size()) {
            std::copy(head.begin() + static_cast<long>(pos),
                      head.begin() + static_cast<long>(pos + 8), buf);
        } else {
            in.seekg(static_cast<std::streamoff>(pos));
            in.read(reinterpret_cast<char*>(buf), 8);
            if (in.gcount() < 8) return 0;
        }
        uint32_t len = static_cast<uint32_t>(buf[4]) | (buf[5] << 8) | (buf[6] << 16) |
                       (static_cast<uint32_t>(buf[7]) << 24);
        if (std::memcmp(buf, "fmt ", 4) == 0) {
            unsigned char fmt[8];
            in.seekg(static_cast<std::streamoff>(pos + 8));
            in.read(reinterpret_cast<char*>(fmt), 8);
            if (in.gcount() < 8) return 0;
            return static_cast<int>(static_cast<uint32_t>(fmt[4]) | (fmt[5] << 8) |
                                    (fmt[6] << 16) | (static_cast<uint32_t>(fmt[7]) << 24));
        }
        pos += 8 + len + (len & 1);
        if (pos > 1 << 20) return 0;
    }
}

void scan_split_dir(const fs::path& dir, const std::string& machine_type, Split split,
                    ScanResult& out) {
    if (!fs::is_directory(dir)) return;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::string ext = p.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext != ".wav") continue;
        auto parsed = parse_dcase_name(p.filename().string());
        if (!parsed) {
            ++out.skipped;
            out.warnings.push_back("unparseable filename, skipped: " + p.string());
            continue;
        }
        if (split == Split::train && parsed->condition != Condition::normal) {
            ++out.skipped;
            out.warnings.push_back("non-normal clip under train split, skipped: " + p.string());
            continue;
        }
        AudioClip clip;
        clip.machine_type = machine_type;
        clip.machine_id = parsed->machine_id;
        clip.condition = parsed->condition;
        clip.split = split;
        clip.source_path = p.string();
        clip.sample_rate = wav_header_sample_rate(p);
        out.clips.push_back(std::move(clip));
    }
}

}  // namespace

ScanResult scan_dataset(const fs::path& root) {
    return scan_dataset(std::vector<fs::path>{root});
}

ScanResult scan_dataset(const std::vector<fs::path>& roots) {
    ScanResult out;
    for (const auto& root : roots) {
        if (!fs::is_directory(root)) {
            throw std::runtime_error("dataset root not found: " + root.string());
        }
        std::vector<fs::path> type_dirs;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory()) type_dirs.push_back(e.path());
        }
        std::sort(type_dirs.begin(), type_dirs.end());
        for (const auto& td : type_dirs) {
            const std::string machine_type = td.filename().string();
            scan_split_dir(td / "train", machine_type, Split::train, out);
            scan_split_dir(td / "test", machine_type, Split::test, out);
        }
    }
    if (out.clips.empty()) {
        throw std::runtime_error("no clips found under dataset root(s)");
    }
    return out;
}

void load_waveform(AudioClip& clip, int target_sr, size_t fixed_samples) {
    if (clip.samples.empty()) {
        if (clip.source_path.empty()) {
            throw std::runtime_error("clip has neither samples nor a source path");
        }
        Waveform w = read_wav(clip.source_path);
        clip.samples = std::move(w.samples);
        clip.sample_rate = w.sample_rate;
    }
    if (clip.sample_rate <= 0) throw std::runtime_error("clip has invalid sample rate");
    if (target_sr > 0 && clip.sample_rate != target_sr) {
        clip.samples = resample_linear(clip.samples, clip.sample_rate, target_sr);
        clip.sample_rate = target_sr;
    }
    if (fixed_samples > 0) clip.samples = fix_length(std::move(clip.samples), fixed_samples);
}

void write_manifest(const fs::path& path, const std::vector<AudioClip>& clips) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write manifest: " + path.string());
    for (const auto& c : clips) {
        os << c.source_path << '\t' << c.machine_type << '\t' << c.machine_id << '\t'
           << to_string(c.condition) << '\t' << to_string(c.split) << '\n';
    }
}

std::vector<AudioClip> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest: " + path.string());
    std::vector<AudioClip> clips;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string p, type, id, cond, split;
        if (!std::getline(ss, p, '\t') || !std::getline(ss, type, '\t') ||
            !std::getline(ss, id, '\t') || !std::getline(ss, cond, '\t') ||
            !std::getline(ss, split, '\t')) {
            throw std::runtime_error("malformed manifest line: " + line);
        }
        AudioClip c;
        c.source_path = p;
        c.machine_type = type;
        c.machine_id = std::stoi(id);
        c.condition = cond == "normal"      ? Condition::normal
                      : cond == "anomalous" ? Condition::anomalous
                                            : Condition::unknown;
        c.split = split == "train" ? Split::train : Split::test;
        clips.push_back(std::move(c));
    }
    return clips;
}

}  // namespace clpscf
