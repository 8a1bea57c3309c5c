#include "clpscf/sampler.hpp"

#include <numeric>
#include <stdexcept>

namespace clpscf {

std::vector<std::pair<size_t, int>> sample_per_id_batch(
    const std::vector<std::vector<size_t>>& class_items, int per_id, Rng& rng) {
    if (class_items.empty()) throw std::invalid_argument("sample_per_id_batch: no classes");
    if (per_id < 2) throw std::invalid_argument("sample_per_id_batch: per_id must be >= 2");

    std::vector<std::pair<size_t, int>> batch;
    batch.reserve(class_items.size() * static_cast<size_t>(per_id));
    for (size_t c = 0; c < class_items.size(); ++c) {
        const auto& items = class_items[c];
        if (items.empty()) {
            throw std::invalid_argument("sample_per_id_batch: class " + std::to_string(c) +
                                        " has no clips");
        }
        if (items.size() >= static_cast<size_t>(per_id)) {
            // Partial Fisher-Yates over a scratch index vector.
            std::vector<size_t> idx(items.size());
            std::iota(idx.begin(), idx.end(), 0);
            for (int k = 0; k < per_id; ++k) {
                const size_t j = k + rng.index(idx.size() - static_cast<size_t>(k));
                std::swap(idx[static_cast<size_t>(k)], idx[j]);
                batch.emplace_back(items[idx[static_cast<size_t>(k)]], static_cast<int>(c));
            }
        } else {
            for (int k = 0; k < per_id; ++k) {
                batch.emplace_back(items[rng.index(items.size())], static_cast<int>(c));
            }
        }
    }
    rng.shuffle(batch);
    return batch;
}

}  // namespace clpscf
