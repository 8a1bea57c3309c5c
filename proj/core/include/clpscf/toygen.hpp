#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "clpscf/dataio.hpp"

namespace clpscf {

// Desk-scale synthetic dataset: every (machine_type, machine_id) gets a
// distinct harmonic signature; anomalous test clips carry an extra
// detuned tone at 1.5x the fundamental.
struct ToySpec {
    int num_types = 2;
    int ids_per_type = 2;
    int clips_per_id = 10;     // per split
    double clip_seconds = 1.0;
    int sample_rate = 8000;
    double anomaly_fraction_test = 0.5;
    uint64_t seed = 0;

    void validate() const;
};

struct ToyDataset {
    std::vector<AudioClip> train;  // normal only
    std::vector<AudioClip> test;
};

// Pure function of the spec: identical specs give bit-identical
// waveforms regardless of call order.
ToyDataset generate_toy_dataset(const ToySpec& spec);

// Fundamental frequency assigned to machine (type_idx, id), spaced
// geometrically over [200, 2000] Hz across all machines.
double toy_fundamental(const ToySpec& spec, int type_idx, int id);

// Writes the dataset as a DCASE-style tree
// (<out>/<type>/{train,test}/{normal|anomaly}_id_XX_NNNNNNNN.wav) plus a
// `manifest.tsv` sidecar. Returns the clips with source paths set.
ToyDataset write_toy_dataset(const ToySpec& spec, const std::filesystem::path& out_dir);

}  // namespace clpscf
