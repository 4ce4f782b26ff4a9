// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "omnisched/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace omnisched {

// Hardware topology and the knobs of the parametric cost model. Immutable
// after construction; shared freely across concurrent simulations.
struct ClusterSpec {
    int num_nodes = 1;
    int gpus_per_node = 1;
    double peak_flops = 1e15;          // FLOP/s per device
    std::int64_t device_memory = 0;    // bytes; 0 disables the memory bound check
    double host_link_bw = 50e9;        // bytes/s, device<->host offload path
    double intra_node_bw = 200e9;      // bytes/s
    double inter_node_bw = 25e9;       // bytes/s, per node uplink to the spine
    double link_latency_intra = 20e-6;  // seconds
    double link_latency_inter = 100e-6;
    double compute_efficiency = 0.5;   // (0,1]
    double overlap_efficiency = 0.5;   // [0,1]; 1 hides comm up to available compute time
    double quant_speedup = 1.0;        // >= 1, FP8 multiplier on GEMM + attention compute
    double quant_comm_factor = 1.0;    // (0,1], payload shrink for FP8 communication

    int total_ranks() const { return num_nodes * gpus_per_node; }
    int node_of(int rank) const { return rank / gpus_per_node; }

    void validate() const;  // throws ValidationError("InvalidClusterSpec", ...)
};

struct ModelShape {
    int hidden_dim = 1024;
    int num_heads = 16;
    int head_dim = 64;
    int num_layers = 8;
    std::int64_t bytes_per_token_activation = 0;  // stored activation bytes per token per layer
    int bytes_per_element = 2;

    // Per-layer parameter count implied by the GEMM FLOP constant below
    // (QKVO projections + 4x MLP = 12 * hidden^2 weights).
    std::int64_t params_per_layer() const {
        return 12LL * hidden_dim * hidden_dim;
    }

    void validate() const;  // hidden_dim == num_heads * head_dim, all positive
};

enum class Path { intra, inter, host };

Path path_from_string(const std::string& s);
std::string to_string(Path p);

// Roofline-style per-layer compute time for one device.
//   gemm_flops = 24 * tokens * hidden_dim^2
//   attn_flops = 4 * attn_nnz * hidden_dim
//   time = (gemm_flops + attn_flops) / (peak_flops * compute_efficiency * quant_speedup)
double layer_compute_time(const ModelShape& shape, std::int64_t tokens,
                          std::int64_t attn_nnz, const ClusterSpec& spec);

// Alpha-beta message cost: latency(path) + effective_bytes / bw(path).
// quant_comm_factor shrinks the payload on network paths (intra/inter); host
// transfers move raw activations. The host path has no modeled latency.
double message_time(std::int64_t bytes, Path path, const ClusterSpec& spec);

// Per-rank bytes sent in one ulysses all-to-all:
//   (up_degree - 1) / up_degree * tokens * hidden_dim * bytes_per_element
// Tokens not divisible by up_degree are padded up to the next multiple and
// the padding is charged. up_degree must divide num_heads.
std::int64_t ulysses_alltoall_bytes(std::int64_t tokens, const ModelShape& shape,
                                    int up_degree);

// JSON (de)serialization. The schema mirrors the struct fields; units are
// bytes, FLOP/s and seconds throughout.
ClusterSpec cluster_from_json(const nlohmann::json& j);
nlohmann::json cluster_to_json(const ClusterSpec& spec);
ClusterSpec load_cluster(const std::filesystem::path& path);

ModelShape model_shape_from_json(const nlohmann::json& j);
nlohmann::json model_shape_to_json(const ModelShape& shape);

// The frozen defaults bundled with the project (configs/cluster_default.json
// mirrors these values). FP8 factors are assumptions, not measured numbers.
ClusterSpec default_cluster();
ModelShape default_model_shape();

}  // namespace omnisched
