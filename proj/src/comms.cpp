// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/comms.hpp"

#include <algorithm>
#include <sstream>

namespace omnisched {

void TransferMatrix::validate() const {
    if (num_ranks <= 0) {
        throw ValidationError("InvalidTransferMatrix", "num_ranks must be > 0");
    }
    if (bytes.size() != static_cast<std::size_t>(num_ranks)) {
        throw ValidationError("InvalidTransferMatrix", "matrix row count mismatch");
    }
    for (const auto& row : bytes) {
        if (row.size() != static_cast<std::size_t>(num_ranks)) {
            throw ValidationError("InvalidTransferMatrix", "matrix column count mismatch");
        }
        for (std::int64_t v : row) {
            if (v < 0) {
                throw ValidationError("InvalidTransferMatrix", "entries must be >= 0");
            }
        }
    }
}

namespace {

void check_topology(const TransferMatrix& m, const ClusterSpec& spec) {
    m.validate();
    if (m.num_ranks != spec.total_ranks()) {
        std::ostringstream os;
        os << "matrix has " << m.num_ranks << " ranks but cluster has "
           << spec.total_ranks() << " (" << spec.num_nodes << " nodes x "
           << spec.gpus_per_node << " gpus)";
        throw ValidationError("RankTopologyMismatch", os.str());
    }
}

std::vector<int> node_leaders(const ClusterSpec& spec) {
    std::vector<int> leaders(static_cast<std::size_t>(spec.num_nodes));
    for (int node = 0; node < spec.num_nodes; ++node) {
        leaders[node] = node * spec.gpus_per_node;  // lowest rank on the node
    }
    return leaders;
}

}  // namespace

CommPlan plan_direct(const TransferMatrix& m, const ClusterSpec& spec) {
    check_topology(m, spec);
    CommPlan plan;
    plan.leaders = node_leaders(spec);
    plan.phases.emplace_back();
    auto& phase = plan.phases.back();
    for (int src = 0; src < m.num_ranks; ++src) {
        for (int dst = 0; dst < m.num_ranks; ++dst) {
            if (src == dst || m.at(src, dst) == 0) continue;
            const Path path =
                spec.node_of(src) == spec.node_of(dst) ? Path::intra : Path::inter;
            phase.push_back(CommMessage{src, dst, m.at(src, dst), path});
        }
    }
    return plan;
}

CommPlan plan_two_tier(const TransferMatrix& m, const ClusterSpec& spec) {
    check_topology(m, spec);
    CommPlan plan;
    plan.leaders = node_leaders(spec);
    plan.phases.resize(3);

    // Phase 1: same-node pairs go direct; payloads for remote nodes are
    // forwarded to the local leader, one message per (rank, destination node).
    auto& gather = plan.phases[0];
    for (int src = 0; src < m.num_ranks; ++src) {
        const int src_node = spec.node_of(src);
        for (int dst = 0; dst < m.num_ranks; ++dst) {
            if (src == dst || m.at(src, dst) == 0) continue;
            if (spec.node_of(dst) == src_node) {
                gather.push_back(CommMessage{src, dst, m.at(src, dst), Path::intra});
            }
        }
        for (int dst_node = 0; dst_node < spec.num_nodes; ++dst_node) {
            if (dst_node == src_node) continue;
            std::int64_t total = 0;
            for (int dst = dst_node * spec.gpus_per_node;
                 dst < (dst_node + 1) * spec.gpus_per_node; ++dst) {
                total += m.at(src, dst);
            }
            if (total == 0 || src == plan.leaders[src_node]) continue;
            gather.push_back(
                CommMessage{src, plan.leaders[src_node], total, Path::intra});
        }
    }

    // Phase 2: one leader-to-leader message per ordered node pair.
    auto& exchange = plan.phases[1];
    for (int a = 0; a < spec.num_nodes; ++a) {
        for (int b = 0; b < spec.num_nodes; ++b) {
            if (a == b) continue;
            std::int64_t total = 0;
            for (int src = a * spec.gpus_per_node; src < (a + 1) * spec.gpus_per_node;
                 ++src) {
                for (int dst = b * spec.gpus_per_node;
                     dst < (b + 1) * spec.gpus_per_node; ++dst) {
                    total += m.at(src, dst);
                }
            }
            if (total == 0) continue;
            exchange.push_back(
                CommMessage{plan.leaders[a], plan.leaders[b], total, Path::inter});
        }
    }

    // Phase 3: destination leader scatters remote-origin payloads locally.
    auto& scatter = plan.phases[2];
    for (int dst = 0; dst < m.num_ranks; ++dst) {
        const int dst_node = spec.node_of(dst);
        std::int64_t total = 0;
        for (int src = 0; src < m.num_ranks; ++src) {
            if (spec.node_of(src) != dst_node) total += m.at(src, dst);
        }
        if (total == 0 || dst == plan.leaders[dst_node]) continue;
        scatter.push_back(CommMessage{plan.leaders[dst_node], dst, total, Path::intra});
    }
    return plan;
}

PlanCost plan_cost(const CommPlan& plan, const ClusterSpec& spec) {
    PlanCost cost;
    cost.uplink.resize(static_cast<std::size_t>(spec.num_nodes));
    cost.intra_fabric.resize(static_cast<std::size_t>(spec.num_nodes));

    for (const auto& phase : plan.phases) {
        std::vector<double> uplink_time(static_cast<std::size_t>(spec.num_nodes), 0.0);
        std::vector<double> fabric_time(static_cast<std::size_t>(spec.num_nodes), 0.0);
        for (const auto& msg : phase) {
            const int src_node = spec.node_of(msg.src_rank);
            const double t = message_time(msg.bytes, msg.path, spec);
            if (msg.path == Path::inter) {
                uplink_time[src_node] += t;
                cost.uplink[src_node].bytes += msg.bytes;
                cost.uplink[src_node].messages += 1;
                cost.uplink[src_node].seconds += t;
            } else {
                fabric_time[src_node] += t;
                cost.intra_fabric[src_node].bytes += msg.bytes;
                cost.intra_fabric[src_node].messages += 1;
                cost.intra_fabric[src_node].seconds += t;
            }
        }
        double phase_time = 0.0;
        for (int node = 0; node < spec.num_nodes; ++node) {
            phase_time = std::max(phase_time, uplink_time[node]);
            phase_time = std::max(phase_time, fabric_time[node]);
        }
        cost.phase_seconds.push_back(phase_time);
        cost.total_seconds += phase_time;
    }
    return cost;
}

std::int64_t inter_node_bytes(const CommPlan& plan) {
    std::int64_t total = 0;
    for (const auto& phase : plan.phases) {
        for (const auto& msg : phase) {
            if (msg.path == Path::inter) total += msg.bytes;
        }
    }
    return total;
}

std::int64_t inter_node_message_count(const CommPlan& plan) {
    std::int64_t count = 0;
    for (const auto& phase : plan.phases) {
        for (const auto& msg : phase) {
            if (msg.path == Path::inter) ++count;
        }
    }
    return count;
}

}  // namespace omnisched
