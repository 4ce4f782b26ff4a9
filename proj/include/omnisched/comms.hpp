// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "omnisched/cluster.hpp"

namespace omnisched {

// Dense all-to-all traffic demand between ranks. Diagonal entries are
// permitted and cost nothing.
struct TransferMatrix {
    int num_ranks = 0;
    std::vector<std::vector<std::int64_t>> bytes;

    void validate() const;
    std::int64_t at(int src, int dst) const { return bytes[src][dst]; }
};

struct CommMessage {
    int src_rank = 0;
    int dst_rank = 0;
    std::int64_t bytes = 0;
    Path path = Path::intra;
};

// Ordered phases of concurrent messages. Messages within a phase run
// concurrently (subject to per-link serialization); phases are strictly
// ordered.
struct CommPlan {
    std::vector<std::vector<CommMessage>> phases;
    std::vector<int> leaders;  // designated leader rank per node
};

// Baseline: a single phase with one message per nonzero off-diagonal entry,
// path chosen by node co-residency.
CommPlan plan_direct(const TransferMatrix& m, const ClusterSpec& spec);

// Two-tier strategy: (1) intra-node, each rank forwards its payload for every
// remote destination node to the local leader (one message per destination
// node), while same-node pairs go direct; (2) inter-node, exactly one
// leader-to-leader message per ordered node pair with nonzero aggregate;
// (3) intra-node scatter from the destination leader to final destinations.
CommPlan plan_two_tier(const TransferMatrix& m, const ClusterSpec& spec);

// Per-phase, per-link serialization cost. Inter-node messages serialize on
// the source node's uplink; intra-node messages on the node's local fabric.
struct LinkLoad {
    std::int64_t bytes = 0;
    std::int64_t messages = 0;
    double seconds = 0.0;
};

struct PlanCost {
    double total_seconds = 0.0;
    std::vector<double> phase_seconds;
    std::vector<LinkLoad> uplink;       // per node, inter traffic
    std::vector<LinkLoad> intra_fabric; // per node, intra traffic
};

PlanCost plan_cost(const CommPlan& plan, const ClusterSpec& spec);

// Total payload bytes on inter-node messages across all phases.
std::int64_t inter_node_bytes(const CommPlan& plan);
std::int64_t inter_node_message_count(const CommPlan& plan);

}  // namespace omnisched
