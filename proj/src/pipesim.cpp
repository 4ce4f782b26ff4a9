// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/pipesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace omnisched {

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::fwd: return "fwd";
        case EventKind::bwd: return "bwd";
        case EventKind::send: return "send";
        case EventKind::recv: return "recv";
        case EventKind::alltoall: return "alltoall";
        case EventKind::offload: return "offload";
        case EventKind::onload: return "onload";
        case EventKind::stall: return "stall";
        case EventKind::encoder: return "encoder";
    }
    throw InvariantError("UnknownEventKind", "unhandled event kind");
}

std::vector<std::size_t> select_recompute(const std::vector<RecomputeItem>& catalog,
                                          double budget_seconds) {
    if (budget_seconds < 0) {
        throw ValidationError("InvalidRecomputeBudget", "budget must be >= 0");
    }
    if (catalog.size() > 30) {
        throw ValidationError("InvalidRecomputeCatalog",
                              "catalogs are limited to 30 items");
    }
    for (const auto& item : catalog) {
        if (item.bytes_saved < 0 || item.recompute_seconds < 0) {
            throw ValidationError("InvalidRecomputeCatalog",
                                  "bytes_saved and recompute_seconds must be >= 0");
        }
    }

    // Discretize time onto <= 2^20 slots; item weights round up so a selection
    // within the discrete budget never exceeds the real one.
    constexpr std::int64_t kSlots = 1 << 20;
    const double quantum = budget_seconds > 0
                               ? budget_seconds / static_cast<double>(kSlots)
                               : 1.0;
    std::vector<std::int64_t> weight(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        weight[i] = static_cast<std::int64_t>(
            std::ceil(catalog[i].recompute_seconds / quantum - 1e-9));
        if (weight[i] < 0) weight[i] = 0;
    }
    const std::int64_t cap = budget_seconds > 0 ? kSlots : 0;

    struct Cell {
        std::int64_t bytes = -1;  // -1 marks unreachable
        int items = 0;
        std::uint32_t mask = 0;
    };
    // Better solution: more bytes; then fewer items; then lexicographically
    // smaller index set (smaller mask value == earlier indices chosen).
    auto better = [](const Cell& a, const Cell& b) {
        if (a.bytes != b.bytes) return a.bytes > b.bytes;
        if (a.items != b.items) return a.items < b.items;
        return a.mask < b.mask;
    };

    std::vector<Cell> dp(static_cast<std::size_t>(cap) + 1);
    dp[0] = Cell{0, 0, 0};
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (weight[i] > cap) continue;
        for (std::int64_t t = cap; t >= weight[i]; --t) {
            const Cell& from = dp[static_cast<std::size_t>(t - weight[i])];
            if (from.bytes < 0) continue;
            Cell cand{from.bytes + catalog[i].bytes_saved, from.items + 1,
                      from.mask | (1u << i)};
            Cell& into = dp[static_cast<std::size_t>(t)];
            if (into.bytes < 0 || better(cand, into)) into = cand;
        }
    }
    Cell best = dp[0];
    for (const Cell& c : dp) {
        if (c.bytes >= 0 && better(c, best)) best = c;
    }

    std::vector<std::size_t> selection;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (best.mask & (1u << i)) selection.push_back(i);
    }
    return selection;
}

void ChunkReusePlan::validate(const PipelineConfig& cfg) const {
    std::set<int> seen;
    for (const auto& group : groups) {
        int stage_of_first = -1;
        for (int chunk : group) {
            if (chunk < 0 || chunk >= cfg.total_chunks()) {
                throw ValidationError("OverlappingGroups",
                                      "chunk id outside the pipeline");
            }
            if (!seen.insert(chunk).second) {
                std::ostringstream os;
                os << "chunk " << chunk << " appears in more than one reuse group";
                throw ValidationError("OverlappingGroups", os.str());
            }
            const int stage = chunk % cfg.pp_stages;
            if (stage_of_first < 0) {
                stage_of_first = stage;
            } else if (stage != stage_of_first) {
                throw ValidationError(
                    "OverlappingGroups",
                    "reuse groups must contain chunks of a single stage");
            }
        }
    }
}

SimInputs apply_chunk_reuse(const SimInputs& inputs, const PipelineConfig& cfg,
                            const ChunkReusePlan& reuse) {
    reuse.validate(cfg);
    SimInputs out = inputs;
    out.reuse = reuse;
    return out;
}

namespace {

struct UpChoice {
    int degree = 1;
    std::vector<int> lanes;  // member lanes within the stage pool
};

std::vector<UpChoice> resolve_up_plan(const SimInputs& inputs,
                                      const PipelineConfig& cfg,
                                      const ModelShape& shape) {
    std::vector<UpChoice> up(inputs.microbatches.size());
    for (auto& c : up) c.lanes = {0};

    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < inputs.microbatches.size(); ++i) {
        by_id[inputs.microbatches[i].id] = i;
    }
    for (const auto& entry : cfg.up_plan.entries) {
        auto it = by_id.find(entry.microbatch_id);
        if (it == by_id.end()) {
            throw ValidationError("InvalidUpPlan",
                                  "up plan names unknown microbatch '" +
                                      entry.microbatch_id + "'");
        }
        if (entry.up_degree < 1 || entry.up_degree > cfg.stage_width) {
            throw ValidationError("InvalidUpPlan",
                                  "up_degree must be in [1, stage_width]");
        }
        if (shape.num_heads % entry.up_degree != 0) {
            throw ValidationError("IndivisibleHeads",
                                  "up_degree must divide num_heads");
        }
        UpChoice c;
        c.degree = entry.up_degree;
        if (!entry.member_ranks.empty()) {
            if (static_cast<int>(entry.member_ranks.size()) != entry.up_degree) {
                throw ValidationError("InvalidUpPlan",
                                      "member_ranks size must equal up_degree");
            }
            std::set<int> uniq(entry.member_ranks.begin(), entry.member_ranks.end());
            if (uniq.size() != entry.member_ranks.size() || *uniq.begin() < 0 ||
                *uniq.rbegin() >= cfg.stage_width) {
                throw ValidationError("InvalidUpPlan",
                                      "member_ranks must be distinct lanes");
            }
            c.lanes.assign(uniq.begin(), uniq.end());
        } else {
            c.lanes.clear();
            for (int l = 0; l < entry.up_degree; ++l) c.lanes.push_back(l);
        }
        up[it->second] = c;
    }
    return up;
}

struct MemDelta {
    double time;
    int rank;
    std::int64_t delta;
    int order;  // frees (negative) apply before allocations at equal times
};

constexpr double kUnset = -1.0;

}  // namespace

ScheduleTrace simulate(const std::vector<StageSchedule>& schedule,
                       const SimInputs& inputs, const ClusterSpec& spec,
                       const PipelineConfig& cfg, const ModelShape& shape) {
    cfg.validate();
    spec.validate();
    shape.validate();
    inputs.reuse.validate(cfg);
    if (static_cast<int>(schedule.size()) != cfg.pp_stages) {
        throw ValidationError("InvalidSchedule",
                              "schedule stage count != pp_stages");
    }
    const int pp = cfg.pp_stages;
    const int v = cfg.virtual_chunks;
    const int m = cfg.microbatches;
    const int width = cfg.stage_width;
    const int chunks = cfg.total_chunks();
    if (static_cast<int>(inputs.microbatches.size()) < m) {
        throw ValidationError("InvalidSchedule",
                              "costs missing for some microbatches");
    }
    if (!inputs.encoder_seconds_per_stage.empty() &&
        static_cast<int>(inputs.encoder_seconds_per_stage.size()) != pp) {
        throw ValidationError("InvalidSchedule",
                              "encoder loads must cover every stage");
    }

    const auto up = resolve_up_plan(inputs, cfg, shape);

    // Per-microbatch recompute adjustments, spread uniformly over chunks.
    std::int64_t saved_per_chunk_total = 0;
    double recompute_per_chunk = 0.0;
    for (std::size_t idx : inputs.recompute_selection) {
        if (idx >= inputs.recompute_catalog.size()) {
            throw ValidationError("InvalidRecomputeCatalog",
                                  "selection index outside the catalog");
        }
        saved_per_chunk_total += inputs.recompute_catalog[idx].bytes_saved;
        recompute_per_chunk += inputs.recompute_catalog[idx].recompute_seconds;
    }
    saved_per_chunk_total /= chunks;
    recompute_per_chunk /= static_cast<double>(chunks);

    // Chunk-reuse bookkeeping: which chunk leads its group (charges the
    // input) and which chunks trail (skip input storage and prep compute).
    std::vector<int> group_of(static_cast<std::size_t>(chunks), -1);
    std::vector<int> group_lead(static_cast<std::size_t>(chunks), -1);
    for (std::size_t g = 0; g < inputs.reuse.groups.size(); ++g) {
        int lead = *std::min_element(inputs.reuse.groups[g].begin(),
                                     inputs.reuse.groups[g].end());
        for (int c : inputs.reuse.groups[g]) {
            group_of[static_cast<std::size_t>(c)] = static_cast<int>(g);
            group_lead[static_cast<std::size_t>(c)] = lead;
        }
    }

    auto stored_bytes = [&](int mb) {
        const std::int64_t base = inputs.microbatches[mb].act_bytes_per_chunk;
        return std::max<std::int64_t>(0, base - saved_per_chunk_total);
    };

    // Stage engine state.
    std::vector<std::size_t> cursor(static_cast<std::size_t>(pp), 0);
    std::vector<double> engine_free(static_cast<std::size_t>(pp), 0.0);
    std::vector<std::vector<double>> op_start(
        static_cast<std::size_t>(pp));  // per stage, per op index
    for (int s = 0; s < pp; ++s) {
        op_start[s].assign(schedule[s].size(), kUnset);
    }
    std::vector<double> host_free(static_cast<std::size_t>(pp) * width, 0.0);

    // Completion times per (microbatch, global chunk).
    auto grid = [&](double init) {
        return std::vector<std::vector<double>>(
            static_cast<std::size_t>(m),
            std::vector<double>(static_cast<std::size_t>(chunks), init));
    };
    auto fwd_end = grid(kUnset);
    auto bwd_end = grid(kUnset);
    auto offload_end = grid(kUnset);
    auto onload_end = grid(kUnset);

    ScheduleTrace trace;
    std::vector<MemDelta> deltas;

    const bool offloading = cfg.offload_policy == OffloadPolicy::pipeline_aware;

    // Encoder phase: one event per stage (whole pool), all starting at 0.
    std::vector<double> encoder_end(static_cast<std::size_t>(pp), 0.0);
    double encoder_barrier = 0.0;
    if (!inputs.encoder_seconds_per_stage.empty()) {
        for (int s = 0; s < pp; ++s) {
            const double dur = inputs.encoder_seconds_per_stage[s];
            if (dur < 0) {
                throw ValidationError("InvalidSchedule", "encoder seconds must be >= 0");
            }
            if (dur > 0) {
                for (int l = 0; l < width; ++l) {
                    trace.events.push_back(
                        {0.0, dur, s * width + l, EventKind::encoder, -1, -1});
                }
            }
            encoder_end[s] = dur;
            encoder_barrier = std::max(encoder_barrier, dur);
            engine_free[s] = dur;
        }
    }

    auto stage_floor = [&](int s) {
        return cfg.encoder_overlap ? encoder_end[s] : encoder_barrier;
    };

    auto p2p_ready = [&](double produced, int from_stage, int to_stage, int mb,
                         int chunk) {
        const std::int64_t bytes = inputs.microbatches[mb].p2p_bytes;
        if (from_stage == to_stage) return produced;
        const int from_node = spec.node_of(from_stage * width);
        const int to_node = spec.node_of(to_stage * width);
        const Path path = from_node == to_node ? Path::intra : Path::inter;
        const double dt = message_time(bytes, path, spec);
        if (dt > 0) {
            trace.events.push_back({produced, produced + dt, from_stage * width,
                                    EventKind::send, mb, chunk});
            trace.events.push_back({produced, produced + dt, to_stage * width,
                                    EventKind::recv, mb, chunk});
        }
        return produced + dt;
    };

    // Attempts to run the next op of stage s. Returns false when its
    // dependencies are not resolved yet.
    auto try_advance = [&](int s) -> bool {
        if (cursor[s] >= schedule[s].size()) return false;
        const PipeOp& op = schedule[s][cursor[s]];
        const int mb = op.microbatch;
        const int g = op.global_chunk(s, pp);
        if (mb < 0 || mb >= m || op.local_chunk < 0 || op.local_chunk >= v) {
            throw ValidationError("InvalidSchedule", "op indices out of range");
        }
        const MicrobatchWork& work = inputs.microbatches[mb];
        const UpChoice& uc = up[static_cast<std::size_t>(mb)];
        const int u = uc.degree;

        double ready = std::max(engine_free[s], stage_floor(s));

        if (op.kind == PipeOp::Kind::fwd) {
            if (g > 0) {
                if (fwd_end[mb][g - 1] == kUnset) return false;
                ready = std::max(ready, p2p_ready(fwd_end[mb][g - 1], (g - 1) % pp,
                                                  s, mb, g - 1));
            }
        } else {
            if (fwd_end[mb][g] == kUnset) return false;
            if (g < chunks - 1) {
                if (bwd_end[mb][g + 1] == kUnset) return false;
                ready = std::max(ready, p2p_ready(bwd_end[mb][g + 1], (g + 1) % pp,
                                                  s, mb, g + 1));
            }
        }

        // Durations at degree u (work split across the member lanes).
        const bool skip_input_prep =
            group_of[g] >= 0 && group_lead[g] != g;
        double base = op.kind == PipeOp::Kind::fwd
                          ? work.fwd_seconds_per_chunk -
                                (skip_input_prep ? work.input_prep_seconds_per_chunk : 0.0)
                          : work.bwd_seconds_per_chunk + recompute_per_chunk;
        base = std::max(base, 0.0);
        const double compute = base / static_cast<double>(u);
        double exposed = 0.0;
        if (u > 1) {
            const Path path = u <= spec.gpus_per_node ? Path::intra : Path::inter;
            const std::int64_t bytes = ulysses_alltoall_bytes(work.tokens, shape, u);
            const double comm = 2.0 * cfg.layers_per_chunk *
                                message_time(bytes, path, spec);
            exposed = std::max(0.0, comm - spec.overlap_efficiency * compute);
        }

        const std::int64_t shard =
            (stored_bytes(mb) + u - 1) / static_cast<std::int64_t>(u);
        const std::int64_t input_shard =
            (work.input_bytes_per_chunk + u - 1) / static_cast<std::int64_t>(u);

        // Backward waits for the onloaded activation.
        if (op.kind == PipeOp::Kind::bwd && offloading && shard > 0) {
            const std::size_t bwd_index = cursor[s];
            const std::size_t trigger_index =
                bwd_index >= static_cast<std::size_t>(cfg.onload_lead_events)
                    ? bwd_index - static_cast<std::size_t>(cfg.onload_lead_events)
                    : 0;
            const double trigger_time =
                op_start[s][trigger_index] == kUnset ? 0.0 : op_start[s][trigger_index];
            const double dur = message_time(shard, Path::host, spec);
            double end_all = 0.0;
            for (int lane : uc.lanes) {
                const int rank = s * width + lane;
                const double start = std::max({host_free[rank], offload_end[mb][g],
                                               trigger_time});
                host_free[rank] = start + dur;
                trace.events.push_back({start, start + dur, rank, EventKind::onload,
                                        mb, g});
                deltas.push_back({start, rank, shard, +1});
                end_all = std::max(end_all, start + dur);
            }
            onload_end[mb][g] = end_all;
            ready = std::max(ready, end_all);
        }

        const double start = ready;
        const double end = start + compute + exposed;
        op_start[s][cursor[s]] = start;

        if (start > engine_free[s] + 1e-15 && cursor[s] > 0) {
            for (int lane : uc.lanes) {
                trace.events.push_back({engine_free[s], start, s * width + lane,
                                        EventKind::stall, mb, g});
            }
        }

        const EventKind kind =
            op.kind == PipeOp::Kind::fwd ? EventKind::fwd : EventKind::bwd;
        for (int lane : uc.lanes) {
            const int rank = s * width + lane;
            trace.events.push_back({start, start + compute, rank, kind, mb, g});
            if (exposed > 0) {
                trace.events.push_back({start + compute, end, rank,
                                        EventKind::alltoall, mb, g});
            }
        }

        if (op.kind == PipeOp::Kind::fwd) {
            fwd_end[mb][g] = end;
            // Input is charged by the group lead (or every ungrouped chunk).
            const bool charge_input = group_of[g] < 0 || group_lead[g] == g;
            if (charge_input && input_shard > 0) {
                for (int lane : uc.lanes) {
                    deltas.push_back({start, s * width + lane, input_shard, +1});
                }
            }
            if (shard > 0) {
                for (int lane : uc.lanes) {
                    deltas.push_back({end, s * width + lane, shard, +1});
                }
            }
            if (offloading && shard > 0) {
                const double dur = message_time(shard, Path::host, spec);
                double done = 0.0;
                for (int lane : uc.lanes) {
                    const int rank = s * width + lane;
                    const double ostart = std::max(host_free[rank], end);
                    host_free[rank] = ostart + dur;
                    trace.events.push_back({ostart, ostart + dur, rank,
                                            EventKind::offload, mb, g});
                    deltas.push_back({ostart + dur, rank, -shard, -1});
                    done = std::max(done, ostart + dur);
                }
                offload_end[mb][g] = done;
            }
        } else {
            bwd_end[mb][g] = end;
            if (shard > 0) {
                for (int lane : uc.lanes) {
                    deltas.push_back({end, s * width + lane, -shard, -1});
                }
            }
            // Free the input once the last chunk of its group is done.
            bool last_of_group = true;
            if (group_of[g] >= 0) {
                for (int c : inputs.reuse.groups[static_cast<std::size_t>(group_of[g])]) {
                    if (c != g && bwd_end[mb][c] == kUnset) last_of_group = false;
                }
            }
            if (last_of_group && input_shard > 0) {
                for (int lane : uc.lanes) {
                    deltas.push_back({end, s * width + lane, -input_shard, -1});
                }
            }
        }

        engine_free[s] = end;
        ++cursor[s];
        return true;
    };

    // Round-robin progress; a full pass with no progress is a deadlock.
    bool remaining = true;
    while (remaining) {
        remaining = false;
        bool progressed = false;
        for (int s = 0; s < pp; ++s) {
            while (try_advance(s)) progressed = true;
            if (cursor[s] < schedule[s].size()) remaining = true;
        }
        if (remaining && !progressed) {
            throw InvariantError("DeadlockDetected",
                                 "no schedulable operation; per-stage orders are "
                                 "inconsistent with chunk dependencies");
        }
    }

    // Step time and the exposed share of the gradient all-reduce.
    double step = 0.0;
    for (const auto& ev : trace.events) step = std::max(step, ev.t_end);
    if (inputs.dp_groups > 1 && inputs.grad_bytes_per_rank > 0) {
        const double g = static_cast<double>(inputs.dp_groups);
        const std::int64_t wire_bytes = static_cast<std::int64_t>(
            2.0 * (g - 1.0) / g * static_cast<double>(inputs.grad_bytes_per_rank));
        const double t_ar = message_time(wire_bytes, Path::inter, spec);
        trace.allreduce_exposed_seconds = (1.0 - spec.overlap_efficiency) * t_ar;
        step += trace.allreduce_exposed_seconds;
    }
    trace.step_time = step;

    // Sort events: time, then rank, then kind priority (recv < compute <
    // send < offload-side), for byte-identical serialization.
    auto kind_priority = [](EventKind k) {
        switch (k) {
            case EventKind::recv: return 0;
            case EventKind::encoder: return 1;
            case EventKind::fwd: return 1;
            case EventKind::bwd: return 1;
            case EventKind::alltoall: return 2;
            case EventKind::send: return 3;
            case EventKind::offload: return 4;
            case EventKind::onload: return 5;
            case EventKind::stall: return 6;
        }
        return 7;
    };
    std::sort(trace.events.begin(), trace.events.end(),
              [&](const EventRec& a, const EventRec& b) {
                  if (a.t_start != b.t_start) return a.t_start < b.t_start;
                  if (a.rank != b.rank) return a.rank < b.rank;
                  const int pa = kind_priority(a.kind), pb = kind_priority(b.kind);
                  if (pa != pb) return pa < pb;
                  if (a.microbatch != b.microbatch) return a.microbatch < b.microbatch;
                  return a.chunk < b.chunk;
              });

    // Per-rank occupancy and memory peaks.
    const int ranks = pp * width;
    trace.ranks.assign(static_cast<std::size_t>(ranks), {});
    for (const auto& ev : trace.events) {
        if (ev.kind == EventKind::fwd || ev.kind == EventKind::bwd ||
            ev.kind == EventKind::encoder || ev.kind == EventKind::alltoall) {
            trace.ranks[static_cast<std::size_t>(ev.rank)].busy_seconds +=
                ev.t_end - ev.t_start;
        }
    }
    double bubble_sum = 0.0;
    for (auto& rm : trace.ranks) {
        rm.idle_seconds = std::max(0.0, trace.step_time - rm.busy_seconds);
        bubble_sum += trace.step_time > 0 ? rm.idle_seconds / trace.step_time : 0.0;
    }
    trace.bubble_ratio = ranks > 0 ? bubble_sum / static_cast<double>(ranks) : 0.0;

    std::sort(deltas.begin(), deltas.end(), [](const MemDelta& a, const MemDelta& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.order != b.order) return a.order < b.order;  // frees first
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.delta < b.delta;
    });
    std::vector<std::int64_t> current(static_cast<std::size_t>(ranks), 0);
    for (const auto& d : deltas) {
        current[static_cast<std::size_t>(d.rank)] += d.delta;
        auto& rm = trace.ranks[static_cast<std::size_t>(d.rank)];
        rm.peak_memory = std::max(rm.peak_memory, current[static_cast<std::size_t>(d.rank)]);
    }
    if (spec.device_memory > 0) {
        for (auto& rm : trace.ranks) {
            rm.memory_violation = rm.peak_memory > spec.device_memory;
        }
    }

    // Trace invariants that must hold for every simulation.
    for (const auto& ev : trace.events) {
        if (ev.t_end < ev.t_start) {
            throw InvariantError("NegativeDuration", "event with negative duration");
        }
    }
    return trace;
}

std::vector<std::int64_t> estimate_activation_memory(
    const PipelineConfig& cfg, const SimInputs& inputs, const ClusterSpec& spec,
    const ModelShape& shape) {
    const auto schedule = generate_schedule(cfg);
    const auto trace = simulate(schedule, inputs, spec, cfg, shape);
    std::vector<std::int64_t> peaks;
    peaks.reserve(trace.ranks.size());
    for (const auto& rm : trace.ranks) peaks.push_back(rm.peak_memory);
    return peaks;
}

}  // namespace omnisched
