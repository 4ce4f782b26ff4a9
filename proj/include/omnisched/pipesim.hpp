// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnisched/balancer.hpp"
#include "omnisched/cluster.hpp"

namespace omnisched {

enum class OffloadPolicy { none, pipeline_aware };

OffloadPolicy offload_policy_from_string(const std::string& s);
std::string to_string(OffloadPolicy p);

// Interleaved-1F1B pipeline configuration. Stage s hosts model chunks
// {s, s+pp, ..., s+(v-1)*pp} in pipeline order; each stage is a pool of
// stage_width ranks that an elastic-UP microbatch may occupy.
struct PipelineConfig {
    int pp_stages = 1;
    int virtual_chunks = 1;  // v, per stage
    int microbatches = 1;    // m, per step
    int layers_per_chunk = 1;
    int stage_width = 1;
    UpPlan up_plan;  // empty entries -> every microbatch at degree 1
    OffloadPolicy offload_policy = OffloadPolicy::none;
    double recompute_budget = 0.0;  // seconds per microbatch
    int onload_lead_events = 2;
    bool encoder_overlap = false;

    int total_chunks() const { return pp_stages * virtual_chunks; }
    void validate() const;  // warns (log) for m < pp
};

// One scheduled compute operation of a stage.
struct PipeOp {
    enum class Kind { fwd, bwd };
    Kind kind = Kind::fwd;
    int microbatch = 0;
    int local_chunk = 0;  // chunk index within the stage, [0, v)

    int global_chunk(int stage, int pp) const { return local_chunk * pp + stage; }
};

using StageSchedule = std::vector<PipeOp>;

// Standard interleaved 1F1B: warmup forwards, steady-state one-forward/
// one-backward, cooldown backwards. For v > 1 the interleaved ordering
// requires m to be a multiple of pp; other (m, v>1) combinations fall back to
// a valid wave schedule (all forwards in dependency order, then backwards).
std::vector<StageSchedule> generate_schedule(const PipelineConfig& cfg);

// Per-microbatch work description at ulysses degree 1. Per-chunk quantities
// cover layers_per_chunk layers.
struct MicrobatchWork {
    std::string id;
    std::int64_t tokens = 0;
    std::int64_t attn_nnz = 0;              // sized for the a2a/compute split
    double fwd_seconds_per_chunk = 0.0;
    double bwd_seconds_per_chunk = 0.0;
    std::int64_t act_bytes_per_chunk = 0;   // stored activations per chunk
    std::int64_t input_bytes_per_chunk = 0; // chunk input held until bwd
    double input_prep_seconds_per_chunk = 0.0;
    std::int64_t p2p_bytes = 0;             // boundary activation per hop
};

// A per-layer recompute catalog entry, expressed per microbatch: recomputing
// the operator saves bytes_saved of stored activation and adds
// recompute_seconds to the microbatch's backward.
struct RecomputeItem {
    std::string name;
    std::int64_t bytes_saved = 0;
    double recompute_seconds = 0.0;
};

// Exact 0/1 knapsack (maximize bytes saved, sum of seconds <= budget) via
// dynamic programming on discretized time. Ties prefer fewer items, then the
// lexicographically smallest index set. Returns sorted catalog indices.
std::vector<std::size_t> select_recompute(const std::vector<RecomputeItem>& catalog,
                                          double budget_seconds);

// Chunks (global ids) declared to share identical inputs; members must live
// on the same stage. Throws ValidationError("OverlappingGroups", ...) if a
// chunk appears twice.
struct ChunkReusePlan {
    std::vector<std::vector<int>> groups;

    void validate(const PipelineConfig& cfg) const;
};

// Accounting adjustment for identical-input chunks: within a group the input
// activation is stored once and the compute producing it is counted once.
// Returns a copy of the work items with per-(microbatch, chunk) overrides.
struct SimInputs;
SimInputs apply_chunk_reuse(const SimInputs& inputs, const PipelineConfig& cfg,
                            const ChunkReusePlan& reuse);

struct SimInputs {
    std::vector<MicrobatchWork> microbatches;       // index == microbatch id
    std::vector<double> encoder_seconds_per_stage;  // empty -> no encoder phase
    std::vector<RecomputeItem> recompute_catalog;
    std::vector<std::size_t> recompute_selection;   // indices into the catalog
    ChunkReusePlan reuse;
    int dp_groups = 1;                              // for the gradient all-reduce
    std::int64_t grad_bytes_per_rank = 0;

    // Per-chunk input-bytes override built by apply_chunk_reuse:
    // charge[mb][global_chunk] == false drops the input storage + prep time.
    std::vector<std::vector<bool>> charge_input;
};

enum class EventKind { fwd, bwd, send, recv, alltoall, offload, onload, stall, encoder };
std::string to_string(EventKind k);

struct EventRec {
    double t_start = 0.0;
    double t_end = 0.0;
    int rank = 0;  // global rank = stage * stage_width + lane
    EventKind kind = EventKind::fwd;
    int microbatch = -1;
    int chunk = -1;  // global chunk id
};

struct RankMetrics {
    double busy_seconds = 0.0;
    double idle_seconds = 0.0;
    std::int64_t peak_memory = 0;
    bool memory_violation = false;
};

struct ScheduleTrace {
    std::vector<EventRec> events;
    double step_time = 0.0;
    double bubble_ratio = 0.0;  // mean over ranks of idle fraction
    double allreduce_exposed_seconds = 0.0;
    std::vector<RankMetrics> ranks;
};

// Event-driven execution of a generated schedule. Deterministic; throws
// InvariantError("DeadlockDetected", ...) if the per-stage orders cannot make
// progress (impossible for generated schedules).
ScheduleTrace simulate(const std::vector<StageSchedule>& schedule,
                       const SimInputs& inputs, const ClusterSpec& spec,
                       const PipelineConfig& cfg, const ModelShape& shape);

// Per-rank peak activation bytes under a recompute selection (and optional
// chunk reuse), via the same timeline accounting as simulate().
std::vector<std::int64_t> estimate_activation_memory(
    const PipelineConfig& cfg, const SimInputs& inputs, const ClusterSpec& spec,
    const ModelShape& shape);

}  // namespace omnisched
