// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/balancer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace omnisched {

double Assignment::max_load() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.load);
    return m;
}

double Assignment::mean_load() const {
    if (groups.empty()) return 0.0;
    double total = 0.0;
    for (const auto& g : groups) total += g.load;
    return total / static_cast<double>(groups.size());
}

Assignment assign_to_dp(const std::vector<Sample>& samples, int num_groups,
                        const std::function<double(const Sample&)>& load_fn) {
    if (num_groups < 1) {
        throw ValidationError("InvalidGroupCount", "num_groups must be >= 1");
    }
    struct Item {
        const Sample* sample;
        double load;
    };
    std::vector<Item> items;
    items.reserve(samples.size());
    for (const auto& s : samples) items.push_back({&s, load_fn(s)});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        if (a.load != b.load) return a.load > b.load;
        return a.sample->id < b.sample->id;
    });

    Assignment out;
    out.groups.resize(static_cast<std::size_t>(num_groups));
    for (int g = 0; g < num_groups; ++g) out.groups[g].group_id = g;

    for (const auto& item : items) {
        auto lightest = std::min_element(
            out.groups.begin(), out.groups.end(),
            [](const Assignment::Group& a, const Assignment::Group& b) {
                if (a.load != b.load) return a.load < b.load;
                return a.group_id < b.group_id;
            });
        lightest->sample_ids.push_back(item.sample->id);
        lightest->load += item.load;
    }
    return out;
}

namespace {

constexpr int kInfeasible = std::numeric_limits<int>::max() / 2;

// Minimum number of contiguous ranges (each sum <= cap) needed to cover
// items [from, n). Greedy left-to-right packing is optimal for this check.
// All sums are prefix differences so comparisons stay bit-consistent with the
// candidate values searched below.
int min_ranges_needed(const std::vector<double>& prefix, std::size_t from,
                      std::size_t n, double cap) {
    if (from >= n) return 0;
    int ranges = 1;
    std::size_t start = from;
    for (std::size_t i = from; i < n; ++i) {
        if (prefix[i + 1] - prefix[start] > cap) {
            if (i == start) return kInfeasible;  // single item exceeds cap
            ++ranges;
            start = i;
            if (prefix[i + 1] - prefix[start] > cap) return kInfeasible;
        }
    }
    return ranges;
}

}  // namespace

RangePartition partition_encoder_tokens(const std::vector<double>& loads,
                                        int num_stages) {
    if (num_stages < 1) {
        throw ValidationError("InvalidStageCount", "num_stages must be >= 1");
    }
    for (double v : loads) {
        if (!(v >= 0) || !std::isfinite(v)) {
            throw ValidationError("InvalidLoad", "loads must be finite and >= 0");
        }
    }
    const std::size_t n = loads.size();
    RangePartition out;

    if (n == 0) {
        out.ranges.assign(static_cast<std::size_t>(num_stages), {});
        return out;
    }

    // Parametric search: the optimal max-range-sum is one of the contiguous
    // range sums; binary-search that candidate set with the greedy
    // feasibility check.
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + loads[i];

    std::vector<double> candidates;
    candidates.reserve(n * (n + 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j <= n; ++j) {
            candidates.push_back(prefix[j] - prefix[i]);
        }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    std::size_t lo = 0, hi = candidates.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (min_ranges_needed(prefix, 0, n, candidates[mid]) <= num_stages) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    const double best = candidates[lo];

    // Reconstruct the lexicographically earliest cuts: each range takes the
    // fewest items such that the remainder still fits in the stages left.
    // min_ranges_needed is non-increasing in the start position, so the first
    // end that works is the earliest valid cut, and any forced growth keeps
    // the range sum within `best`.
    std::size_t pos = 0;
    for (int stage = 0; stage < num_stages; ++stage) {
        RangePartition::Range r;
        r.begin = pos;
        if (pos < n) {
            const int stages_left = num_stages - stage - 1;
            std::size_t end = pos + 1;
            while (end < n && min_ranges_needed(prefix, end, n, best) > stages_left) {
                ++end;
            }
            r.end = end;
            r.load = prefix[end] - prefix[pos];
            if (r.load > best) {
                throw InvariantError("PartitionIncomplete",
                                     "reconstructed range exceeds the optimal cap");
            }
            pos = end;
        } else {
            r.end = pos;
            r.load = 0.0;
        }
        out.ranges.push_back(r);
        out.max_load = std::max(out.max_load, r.load);
    }
    if (pos != n) {
        throw InvariantError("PartitionIncomplete",
                             "partition reconstruction did not cover all items");
    }
    return out;
}

double modeled_microbatch_seconds(std::int64_t tokens, int up_degree,
                                  const ModelShape& shape, const ClusterSpec& spec) {
    if (tokens <= 0) return 0.0;
    const std::int64_t u = up_degree;
    const std::int64_t padded = (tokens + u - 1) / u * u;
    const std::int64_t tokens_per_rank = padded / u;
    const std::int64_t nnz_per_rank = padded * padded / u;
    const double compute =
        layer_compute_time(shape, tokens_per_rank, nnz_per_rank, spec);
    double exposed = 0.0;
    if (u > 1) {
        const Path path = u <= spec.gpus_per_node ? Path::intra : Path::inter;
        const std::int64_t bytes = ulysses_alltoall_bytes(tokens, shape, up_degree);
        const double comm = 2.0 * message_time(bytes, path, spec);
        exposed = std::max(0.0, comm - spec.overlap_efficiency * compute);
    }
    return (compute + exposed) * static_cast<double>(shape.num_layers);
}

int choose_up_degree(std::int64_t microbatch_tokens, const std::vector<int>& options,
                     std::int64_t per_rank_token_cap, const ModelShape& shape,
                     const ClusterSpec& spec) {
    if (options.empty()) {
        throw ValidationError("InvalidUpOptions", "options must be non-empty");
    }
    int best_u = 0;
    double best_time = std::numeric_limits<double>::infinity();
    for (int u : options) {
        if (u < 1 || shape.num_heads % u != 0) {
            std::ostringstream os;
            os << "option " << u << " does not divide num_heads " << shape.num_heads;
            throw ValidationError("IndivisibleHeads", os.str());
        }
        const std::int64_t per_rank = (microbatch_tokens + u - 1) / u;
        if (per_rank > per_rank_token_cap) continue;
        const double t = modeled_microbatch_seconds(microbatch_tokens, u, shape, spec);
        if (t < best_time || (t == best_time && u < best_u)) {
            best_time = t;
            best_u = u;
        }
    }
    if (best_u == 0) {
        const int max_u = *std::max_element(options.begin(), options.end());
        std::ostringstream os;
        os << "no option fits " << microbatch_tokens << " tokens under cap "
           << per_rank_token_cap << " (largest option " << max_u << " needs cap >= "
           << (microbatch_tokens + max_u - 1) / max_u << ")";
        throw ValidationError("NoFeasibleDegree", os.str());
    }
    return best_u;
}

std::vector<std::vector<MicrobatchItem>> reorder_microbatches(
    const std::vector<MicrobatchItem>& microbatches, int dp_groups) {
    if (dp_groups < 1) {
        throw ValidationError("InvalidGroupCount", "dp_groups must be >= 1");
    }
    std::vector<MicrobatchItem> items = microbatches;
    std::sort(items.begin(), items.end(),
              [](const MicrobatchItem& a, const MicrobatchItem& b) {
                  if (a.seconds != b.seconds) return a.seconds > b.seconds;
                  return a.id < b.id;
              });
    std::vector<std::vector<MicrobatchItem>> groups(
        static_cast<std::size_t>(dp_groups));
    std::vector<double> load(static_cast<std::size_t>(dp_groups), 0.0);
    for (const auto& item : items) {
        std::size_t target = 0;
        for (std::size_t g = 1; g < load.size(); ++g) {
            if (load[g] < load[target]) target = g;
        }
        groups[target].push_back(item);
        load[target] += item.seconds;
    }
    // Items entered in descending order, so each group is already sorted
    // longest-first.
    return groups;
}

}  // namespace omnisched
