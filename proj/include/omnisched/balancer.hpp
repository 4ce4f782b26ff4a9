// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "omnisched/cluster.hpp"
#include "omnisched/workload.hpp"

namespace omnisched {

// Sample -> DP-group assignment with per-group estimated load.
struct Assignment {
    struct Group {
        int group_id = 0;
        std::vector<std::string> sample_ids;
        double load = 0.0;
    };
    std::vector<Group> groups;

    double max_load() const;
    double mean_load() const;
};

// Longest-processing-time greedy: sort by load descending (ties by id),
// place each into the currently lightest group (ties by lowest group_id).
Assignment assign_to_dp(const std::vector<Sample>& samples, int num_groups,
                        const std::function<double(const Sample&)>& load_fn);

// Contiguous partition of an ordered load list into num_stages ranges
// minimizing the maximum range sum. Exact (parametric search over the
// feasibility check); ties resolved to the lexicographically earliest cut
// positions. When num_stages exceeds the item count, trailing ranges are
// empty with load 0.
struct RangePartition {
    struct Range {
        std::size_t begin = 0;  // half-open [begin, end) into the load list
        std::size_t end = 0;
        double load = 0.0;
    };
    std::vector<Range> ranges;
    double max_load = 0.0;
};

RangePartition partition_encoder_tokens(const std::vector<double>& loads,
                                        int num_stages);

// Modeled end-to-end microbatch time at a given ulysses degree: per-layer
// compute (tokens and full-attention nnz split across u ranks) plus the
// overlap-adjusted exposure of 2 all-to-alls per layer. The all-to-all runs
// intra-node when the group fits inside a node, inter-node otherwise.
double modeled_microbatch_seconds(std::int64_t tokens, int up_degree,
                                  const ModelShape& shape, const ClusterSpec& spec);

// Smallest-time feasible degree (tokens/u <= cap after padding); ties by
// smallest u. Throws ValidationError("NoFeasibleDegree", ...) when even the
// largest option violates the cap.
int choose_up_degree(std::int64_t microbatch_tokens, const std::vector<int>& options,
                     std::int64_t per_rank_token_cap, const ModelShape& shape,
                     const ClusterSpec& spec);

// Per-microbatch elastic UP plan.
struct UpPlanEntry {
    std::string microbatch_id;
    int up_degree = 1;
    std::vector<int> member_ranks;  // stage-lane ids, lowest-first (in-node first)
};
struct UpPlan {
    std::vector<UpPlanEntry> entries;
};

// One modeled work item for training-time reordering.
struct MicrobatchItem {
    std::string id;
    double seconds = 0.0;
};

// LPT-balanced distribution of microbatches across DP groups; within each
// group, items are ordered by descending modeled time (long items first).
std::vector<std::vector<MicrobatchItem>> reorder_microbatches(
    const std::vector<MicrobatchItem>& microbatches, int dp_groups);

}  // namespace omnisched
