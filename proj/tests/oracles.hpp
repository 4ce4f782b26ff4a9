// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by tests. Everything here
// is brute force or dense enumeration on purpose: these are the oracles the
// fast library code is checked against, so they must not share its logic.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "omnisched/workload.hpp"

namespace oracles {

// Exact bin packing optimum via branch and bound over item->bin assignments.
// Items are placed in descending order; bins with identical free space are
// interchangeable and tried once; a volume lower bound prunes the search.
inline int bin_packing_opt(std::vector<std::int64_t> sizes, std::int64_t capacity) {
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    const int n = static_cast<int>(sizes.size());
    if (n == 0) return 0;

    int best = n;
    std::vector<std::int64_t> space;

    std::int64_t total = 0;
    for (auto s : sizes) total += s;

    std::function<void(int, std::int64_t)> go = [&](int item, std::int64_t remaining) {
        const int used = static_cast<int>(space.size());
        if (used >= best) return;
        std::int64_t slack = 0;
        for (auto sp : space) slack += sp;
        const std::int64_t overflow = remaining - slack;
        int need = used;
        if (overflow > 0) need += static_cast<int>((overflow + capacity - 1) / capacity);
        if (need >= best) return;
        if (item == n) {
            best = used;
            return;
        }
        std::int64_t tried_space = -1;
        for (std::size_t b = 0; b < space.size(); ++b) {
            if (space[b] >= sizes[item] && space[b] != tried_space) {
                tried_space = space[b];
                space[b] -= sizes[item];
                go(item + 1, remaining - sizes[item]);
                space[b] += sizes[item];
            }
        }
        if (static_cast<int>(space.size()) + 1 < best) {
            space.push_back(capacity - sizes[item]);
            go(item + 1, remaining - sizes[item]);
            space.pop_back();
        }
    };
    go(0, total);
    return best;
}

// Exact makespan minimum over every assignment of loads to groups.
inline double makespan_opt(const std::vector<double>& loads, int groups) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> sums(static_cast<std::size_t>(groups), 0.0);
    std::function<void(std::size_t)> go = [&](std::size_t i) {
        if (i == loads.size()) {
            best = std::min(best, *std::max_element(sums.begin(), sums.end()));
            return;
        }
        for (int g = 0; g < groups; ++g) {
            sums[g] += loads[i];
            if (sums[g] < best) go(i + 1);
            sums[g] -= loads[i];
            if (sums[g] == 0.0) break;  // symmetric empty groups
        }
    };
    go(0);
    return best;
}

// Exact linear-partition optimum: enumerate all cut position combinations.
inline double partition_opt(const std::vector<double>& loads, int stages) {
    const int n = static_cast<int>(loads.size());
    double best = std::numeric_limits<double>::infinity();
    // cuts[k] = end index of range k; ranges non-empty until items exhaust.
    std::vector<int> ends;
    std::function<void(int, int)> go = [&](int pos, int left) {
        if (left == 1) {
            double max_sum = 0.0, sum = 0.0;
            int prev = 0;
            for (int e : ends) {
                sum = 0.0;
                for (int i = prev; i < e; ++i) sum += loads[i];
                max_sum = std::max(max_sum, sum);
                prev = e;
            }
            sum = 0.0;
            for (int i = prev; i < n; ++i) sum += loads[i];
            max_sum = std::max(max_sum, sum);
            best = std::min(best, max_sum);
            return;
        }
        // next cut strictly after pos, leaving enough items or allowing
        // trailing empties once items run out
        for (int e = pos + 1; e <= n; ++e) {
            ends.push_back(e);
            go(e, left - 1);
            ends.pop_back();
            if (e == n) break;
        }
        // range may also be empty only when no items remain
        if (pos == n) {
            ends.push_back(n);
            go(n, left - 1);
            ends.pop_back();
        }
    };
    if (stages == 1) {
        double sum = 0.0;
        for (double v : loads) sum += v;
        return sum;
    }
    go(0, stages);
    return best;
}

// Dense boolean mask of permitted pairs.
using DenseMask = std::vector<std::vector<bool>>;

inline DenseMask dense_of(const omnisched::MaskSpec& mask) {
    DenseMask d(static_cast<std::size_t>(mask.length),
                std::vector<bool>(static_cast<std::size_t>(mask.length), false));
    for (const auto& b : mask.blocks) {
        for (std::int64_t q = b.q_begin; q < b.q_end; ++q) {
            for (std::int64_t k = b.k_begin; k < b.k_end; ++k) {
                d[static_cast<std::size_t>(q)][static_cast<std::size_t>(k)] = true;
            }
        }
    }
    return d;
}

inline std::int64_t popcount(const DenseMask& d) {
    std::int64_t n = 0;
    for (const auto& row : d) {
        for (bool b : row) n += b ? 1 : 0;
    }
    return n;
}

// Exhaustive 0/1 knapsack: maximize saved bytes under the time budget.
inline std::int64_t knapsack_opt(const std::vector<std::int64_t>& bytes,
                                 const std::vector<double>& seconds, double budget) {
    const std::size_t n = bytes.size();
    std::int64_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double t = 0.0;
        std::int64_t b = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                t += seconds[i];
                b += bytes[i];
            }
        }
        if (t <= budget) best = std::max(best, b);
    }
    return best;
}

// All-pairs reachability closure of one (even, odd) mask pair applied k
// times, by dense composition. Returns the number of pairs needed, or -1.
inline std::int64_t bfs_pairs_to_full(const DenseMask& even, const DenseMask& odd,
                                      std::int64_t max_pairs) {
    const std::size_t n = even.size();
    DenseMask reach(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) reach[i][i] = true;
    auto apply = [&](const DenseMask& adj) {
        DenseMask out(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (!reach[i][j]) continue;
                for (std::size_t k = 0; k < n; ++k) {
                    if (adj[j][k]) out[i][k] = true;
                }
            }
        }
        reach = out;
    };
    auto complete = [&]() {
        for (const auto& row : reach) {
            for (bool b : row) {
                if (!b) return false;
            }
        }
        return true;
    };
    for (std::int64_t pairs = 1; pairs <= max_pairs; ++pairs) {
        apply(even);
        apply(odd);
        if (complete()) return pairs;
    }
    return -1;
}

}  // namespace oracles
