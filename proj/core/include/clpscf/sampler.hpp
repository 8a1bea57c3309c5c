#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "clpscf/rng.hpp"

namespace clpscf {

// Draws a class-balanced batch: exactly `per_id` entries from every
// class, without replacement when the class holds at least per_id items
// and with replacement otherwise, then shuffles the batch order. The
// returned pairs are (item index into the class list, class index).
//
// `class_items[c]` lists the item ids of class c; every class must be
// non-empty and per_id must be >= 2 (the contrastive loss needs at
// least one positive per anchor).
std::vector<std::pair<size_t, int>> sample_per_id_batch(
    const std::vector<std::vector<size_t>>& class_items, int per_id, Rng& rng);

}  // namespace clpscf
