// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/attnwin.hpp"

#include <algorithm>
#include <sstream>

namespace omnisched {

void TokenGrid::validate() const {
    if (t < 1 || h < 1 || w < 1) {
        throw ValidationError("InvalidTokenGrid", "grid extents must be >= 1");
    }
    if (condition_prefix < 0) {
        throw ValidationError("InvalidTokenGrid", "condition_prefix must be >= 0");
    }
    if (!grid_condition.empty() &&
        grid_condition.size() != static_cast<std::size_t>(grid_tokens())) {
        throw ValidationError("InvalidTokenGrid",
                              "grid_condition must match the grid token count");
    }
}

void WindowSpec::validate() const {
    if (wt < 1 || wh < 1 || ww < 1) {
        throw ValidationError("InvalidWindowSpec", "window extents must be >= 1");
    }
}

std::vector<std::int64_t> TokenGrid::condition_indices() const {
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < condition_prefix; ++i) out.push_back(i);
    if (!grid_condition.empty()) {
        for (std::int64_t i = 0; i < grid_tokens(); ++i) {
            if (grid_condition[static_cast<std::size_t>(i)]) {
                out.push_back(condition_prefix + i);
            }
        }
    }
    return out;
}

namespace {

// One axis split into window segments: even parity tiles from 0, odd parity
// shifts boundaries by floor(extent/2) with truncated edge segments.
struct AxisSegment {
    std::int64_t begin;
    std::int64_t end;
};

std::vector<AxisSegment> axis_segments(std::int64_t length, std::int64_t window,
                                       LayerParity parity) {
    window = std::min(window, length);
    const std::int64_t shift =
        parity == LayerParity::odd ? window / 2 : 0;
    std::vector<AxisSegment> segs;
    std::int64_t pos = 0;
    if (shift > 0) {
        segs.push_back({0, std::min(shift, length)});
        pos = std::min(shift, length);
    }
    while (pos < length) {
        const std::int64_t end = std::min(pos + window, length);
        segs.push_back({pos, end});
        pos = end;
    }
    return segs;
}

// Contiguous flat-index runs covering one 3D window.
std::vector<AxisSegment> window_runs(const TokenGrid& grid, const AxisSegment& ts,
                                     const AxisSegment& hs, const AxisSegment& ws) {
    std::vector<AxisSegment> runs;
    runs.reserve(static_cast<std::size_t>((ts.end - ts.begin) * (hs.end - hs.begin)));
    for (std::int64_t ti = ts.begin; ti < ts.end; ++ti) {
        for (std::int64_t hi = hs.begin; hi < hs.end; ++hi) {
            runs.push_back({grid.flat_index(ti, hi, ws.begin),
                            grid.flat_index(ti, hi, ws.end - 1) + 1});
        }
    }
    return runs;
}

}  // namespace

MaskSpec build_window_mask(const TokenGrid& grid, const WindowSpec& win,
                           LayerParity parity, bool exempt_condition_prefix) {
    grid.validate();
    win.validate();
    MaskSpec mask;
    mask.length = grid.total_tokens();

    const std::int64_t c = grid.condition_prefix;
    if (c > 0) {
        if (exempt_condition_prefix) {
            // Prefix rows and columns carry no window restriction.
            mask.blocks.push_back(Block{0, c, 0, mask.length});
            mask.blocks.push_back(Block{c, mask.length, 0, c});
        } else {
            mask.blocks.push_back(Block{0, c, 0, c});
        }
    }

    const auto tsegs = axis_segments(grid.t, win.wt, parity);
    const auto hsegs = axis_segments(grid.h, win.wh, parity);
    const auto wsegs = axis_segments(grid.w, win.ww, parity);
    for (const auto& ts : tsegs) {
        for (const auto& hs : hsegs) {
            for (const auto& ws : wsegs) {
                const auto runs = window_runs(grid, ts, hs, ws);
                for (const auto& q : runs) {
                    for (const auto& k : runs) {
                        mask.blocks.push_back(Block{q.begin, q.end, k.begin, k.end});
                    }
                }
            }
        }
    }
    return mask;
}

MaskSpec build_asymmetric_mask(std::int64_t total_len,
                               const std::vector<std::int64_t>& condition_set) {
    if (total_len < 0) {
        throw ValidationError("InvalidLength", "total_len must be >= 0");
    }
    std::vector<bool> is_condition(static_cast<std::size_t>(total_len), false);
    for (std::int64_t idx : condition_set) {
        if (idx < 0 || idx >= total_len) {
            std::ostringstream os;
            os << "condition index " << idx << " outside [0, " << total_len << ")";
            throw ValidationError("IndexOutOfRange", os.str());
        }
        is_condition[static_cast<std::size_t>(idx)] = true;
    }

    MaskSpec mask;
    mask.length = total_len;

    // Condition rows: within each maximal run of condition rows, queries
    // attend each maximal run of condition columns.
    std::vector<AxisSegment> cond_runs;
    for (std::int64_t i = 0; i < total_len;) {
        if (!is_condition[static_cast<std::size_t>(i)]) {
            ++i;
            continue;
        }
        std::int64_t j = i;
        while (j < total_len && is_condition[static_cast<std::size_t>(j)]) ++j;
        cond_runs.push_back({i, j});
        i = j;
    }
    for (const auto& q : cond_runs) {
        for (const auto& k : cond_runs) {
            mask.blocks.push_back(Block{q.begin, q.end, k.begin, k.end});
        }
    }
    // Noisy rows attend everything.
    for (std::int64_t i = 0; i < total_len;) {
        if (is_condition[static_cast<std::size_t>(i)]) {
            ++i;
            continue;
        }
        std::int64_t j = i;
        while (j < total_len && !is_condition[static_cast<std::size_t>(j)]) ++j;
        mask.blocks.push_back(Block{i, j, 0, total_len});
        i = j;
    }
    return mask;
}

MaskSpec compose_masks(const MaskSpec& a, const MaskSpec& b) {
    if (a.length != b.length) {
        std::ostringstream os;
        os << "mask lengths differ: " << a.length << " vs " << b.length;
        throw ValidationError("LengthMismatch", os.str());
    }
    MaskSpec out;
    out.length = a.length;
    // Pairwise rectangle intersections of two canonical block sets are
    // pairwise disjoint, so the result is canonical without further work.
    for (const auto& ba : a.blocks) {
        for (const auto& bb : b.blocks) {
            Block r{std::max(ba.q_begin, bb.q_begin), std::min(ba.q_end, bb.q_end),
                    std::max(ba.k_begin, bb.k_begin), std::min(ba.k_end, bb.k_end)};
            if (!r.empty()) out.blocks.push_back(r);
        }
    }
    return out;
}

std::vector<double> kv_cache_step_costs(const MaskSpec& mask,
                                        const std::vector<std::int64_t>& condition_set,
                                        const ModelShape& shape, int steps,
                                        const ClusterSpec& spec) {
    if (steps < 1) {
        throw ValidationError("InvalidSteps", "steps must be >= 1");
    }
    std::vector<bool> is_condition(static_cast<std::size_t>(mask.length), false);
    for (std::int64_t idx : condition_set) {
        if (idx < 0 || idx >= mask.length) {
            std::ostringstream os;
            os << "condition index " << idx << " outside [0, " << mask.length << ")";
            throw ValidationError("IndexOutOfRange", os.str());
        }
        is_condition[static_cast<std::size_t>(idx)] = true;
    }
    std::int64_t cond_tokens = 0;
    for (bool b : is_condition) cond_tokens += b ? 1 : 0;

    const std::int64_t nnz_total = mask_nnz(mask);
    std::int64_t nnz_condition_rows = 0;
    for (const auto& blk : mask.blocks) {
        for (std::int64_t q = blk.q_begin; q < blk.q_end; ++q) {
            if (is_condition[static_cast<std::size_t>(q)]) {
                nnz_condition_rows += blk.k_end - blk.k_begin;
            }
        }
    }

    const double full_cost =
        layer_compute_time(shape, mask.length, nnz_total, spec);
    const double cached_cost = layer_compute_time(
        shape, mask.length - cond_tokens, nnz_total - nnz_condition_rows, spec);

    std::vector<double> costs(static_cast<std::size_t>(steps), cached_cost);
    costs[0] = full_cost;
    return costs;
}

namespace {

using BitRow = std::vector<std::uint64_t>;

std::size_t words_for(std::int64_t n) {
    return static_cast<std::size_t>((n + 63) / 64);
}

void set_bit(BitRow& row, std::int64_t i) {
    row[static_cast<std::size_t>(i >> 6)] |= 1ULL << (i & 63);
}

// Adjacency as bit matrix rows.
std::vector<BitRow> adjacency(const MaskSpec& mask) {
    const std::size_t words = words_for(mask.length);
    std::vector<BitRow> adj(static_cast<std::size_t>(mask.length), BitRow(words, 0));
    for (const auto& blk : mask.blocks) {
        for (std::int64_t q = blk.q_begin; q < blk.q_end; ++q) {
            auto& row = adj[static_cast<std::size_t>(q)];
            for (std::int64_t k = blk.k_begin; k < blk.k_end; ++k) set_bit(row, k);
        }
    }
    return adj;
}

// reach' = reach composed with adj: row i gains the neighborhoods of every
// token it currently reaches.
std::vector<BitRow> compose_reach(const std::vector<BitRow>& reach,
                                  const std::vector<BitRow>& adj) {
    const std::size_t n = reach.size();
    const std::size_t words = n == 0 ? 0 : reach[0].size();
    std::vector<BitRow> out(n, BitRow(words, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t bits = reach[i][w];
            while (bits != 0) {
                const int b = __builtin_ctzll(bits);
                bits &= bits - 1;
                const std::size_t j = w * 64 + static_cast<std::size_t>(b);
                for (std::size_t ww = 0; ww < words; ++ww) out[i][ww] |= adj[j][ww];
            }
        }
    }
    return out;
}

bool all_ones(const std::vector<BitRow>& reach, std::int64_t n) {
    for (const auto& row : reach) {
        std::int64_t count = 0;
        for (std::uint64_t w : row) count += __builtin_popcountll(w);
        if (count != n) return false;
    }
    return true;
}

}  // namespace

std::int64_t connectivity_diameter(const TokenGrid& grid, const WindowSpec& win) {
    grid.validate();
    win.validate();
    const std::int64_t n = grid.total_tokens();
    if (n == 1) return 1;

    const auto even_adj = adjacency(build_window_mask(grid, win, LayerParity::even));
    const auto odd_adj = adjacency(build_window_mask(grid, win, LayerParity::odd));

    // Identity reach, then apply (even, odd) pairs until complete.
    const std::size_t words = words_for(n);
    std::vector<BitRow> reach(static_cast<std::size_t>(n), BitRow(words, 0));
    for (std::int64_t i = 0; i < n; ++i) set_bit(reach[static_cast<std::size_t>(i)], i);

    auto popcount_all = [&]() {
        std::int64_t total = 0;
        for (const auto& row : reach) {
            for (std::uint64_t w : row) total += __builtin_popcountll(w);
        }
        return total;
    };

    std::int64_t prev = popcount_all();
    for (std::int64_t pairs = 1; pairs <= n; ++pairs) {
        reach = compose_reach(reach, even_adj);
        reach = compose_reach(reach, odd_adj);
        if (all_ones(reach, n)) return pairs;
        const std::int64_t now = popcount_all();
        if (now == prev) return kNotConnected;
        prev = now;
    }
    return kNotConnected;
}

std::vector<std::vector<bool>> dense_mask(const MaskSpec& mask) {
    std::vector<std::vector<bool>> dense(
        static_cast<std::size_t>(mask.length),
        std::vector<bool>(static_cast<std::size_t>(mask.length), false));
    for (const auto& blk : mask.blocks) {
        for (std::int64_t q = blk.q_begin; q < blk.q_end; ++q) {
            for (std::int64_t k = blk.k_begin; k < blk.k_end; ++k) {
                dense[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] = true;
            }
        }
    }
    return dense;
}

}  // namespace omnisched
