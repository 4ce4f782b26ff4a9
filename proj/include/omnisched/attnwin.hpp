// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "omnisched/cluster.hpp"
#include "omnisched/workload.hpp"

namespace omnisched {

// A (t, h, w) token grid with an optional flat condition prefix (MVL/LR
// signals). Grid tokens flatten t-major, then h, then w, after the prefix.
struct TokenGrid {
    std::int64_t t = 1;
    std::int64_t h = 1;
    std::int64_t w = 1;
    std::int64_t condition_prefix = 0;
    // Optional per-grid-token role; empty means all grid tokens are noisy.
    std::vector<bool> grid_condition;

    std::int64_t grid_tokens() const { return t * h * w; }
    std::int64_t total_tokens() const { return condition_prefix + grid_tokens(); }
    std::int64_t flat_index(std::int64_t ti, std::int64_t hi, std::int64_t wi) const {
        return condition_prefix + (ti * h + hi) * w + wi;
    }
    // Prefix tokens plus any grid tokens marked condition.
    std::vector<std::int64_t> condition_indices() const;

    void validate() const;
};

struct WindowSpec {
    std::int64_t wt = 1;
    std::int64_t wh = 1;
    std::int64_t ww = 1;

    void validate() const;
};

enum class LayerParity { even, odd };

// Local window attention. Even layers tile the grid with windows aligned at
// multiples of the window extents; odd layers shift the partition boundaries
// by half the window (floor), truncating edge windows (non-cyclic). A token
// attends exactly the tokens of its window. Window extents clamp to the grid.
// The condition prefix forms its own window unless exempt_condition_prefix is
// set, in which case prefix rows and columns are unrestricted.
MaskSpec build_window_mask(const TokenGrid& grid, const WindowSpec& win,
                           LayerParity parity, bool exempt_condition_prefix = false);

// Condition rows attend only condition columns; all other rows attend the
// whole sequence.
MaskSpec build_asymmetric_mask(std::int64_t total_len,
                               const std::vector<std::int64_t>& condition_set);

// Intersection of two masks over equal lengths, re-canonicalized into
// non-overlapping blocks.
MaskSpec compose_masks(const MaskSpec& a, const MaskSpec& b);

// Per-sampling-step compute cost of one layer under the condition KV cache.
// Step 1 pays full QKV projections plus all permitted attention pairs; later
// steps skip condition-token projections and condition-query rows entirely
// (their K/V are cached and their outputs are not consumed).
std::vector<double> kv_cache_step_costs(const MaskSpec& mask,
                                        const std::vector<std::int64_t>& condition_set,
                                        const ModelShape& shape, int steps,
                                        const ClusterSpec& spec);

// Number of (even, odd) layer pairs after which every token can reach every
// other through the composed attention graphs. Returns kNotConnected when the
// iteration stops growing before full connectivity.
inline constexpr std::int64_t kNotConnected = -1;
std::int64_t connectivity_diameter(const TokenGrid& grid, const WindowSpec& win);

// Dense boolean dump of a mask ('1'/'0' rows). Intended for small masks; used
// by the PGM/CSV visualization export.
std::vector<std::vector<bool>> dense_mask(const MaskSpec& mask);

}  // namespace omnisched
