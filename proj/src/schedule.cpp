// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <sstream>

#include "omnisched/log.hpp"
#include "omnisched/pipesim.hpp"

namespace omnisched {

OffloadPolicy offload_policy_from_string(const std::string& s) {
    if (s == "none") return OffloadPolicy::none;
    if (s == "pipeline_aware") return OffloadPolicy::pipeline_aware;
    throw ValidationError("InvalidOffloadPolicy", "no such offload policy: '" + s + "'");
}

std::string to_string(OffloadPolicy p) {
    return p == OffloadPolicy::none ? "none" : "pipeline_aware";
}

void PipelineConfig::validate() const {
    if (pp_stages < 1 || virtual_chunks < 1 || microbatches < 1 ||
        layers_per_chunk < 1 || stage_width < 1) {
        throw ValidationError("InvalidPipelineConfig",
                              "pp_stages, virtual_chunks, microbatches, "
                              "layers_per_chunk and stage_width must be >= 1");
    }
    if (onload_lead_events < 1) {
        throw ValidationError("InvalidPipelineConfig",
                              "onload_lead_events must be >= 1");
    }
    if (recompute_budget < 0) {
        throw ValidationError("InvalidPipelineConfig", "recompute_budget must be >= 0");
    }
    if (microbatches < pp_stages) {
        std::ostringstream os;
        os << "microbatches (" << microbatches << ") < pp_stages (" << pp_stages
           << "); the pipeline cannot fill";
        log::warn(os.str());
    }
}

namespace {

// Classic non-interleaved 1F1B for v == 1. Valid for every m >= 1.
StageSchedule one_f_one_b(int stage, int pp, int m) {
    StageSchedule ops;
    const int warmup = std::min(pp - 1 - stage, m);
    for (int i = 0; i < warmup; ++i) {
        ops.push_back({PipeOp::Kind::fwd, i, 0});
    }
    for (int i = 0; i < m - warmup; ++i) {
        ops.push_back({PipeOp::Kind::fwd, warmup + i, 0});
        ops.push_back({PipeOp::Kind::bwd, i, 0});
    }
    for (int i = m - warmup; i < m; ++i) {
        ops.push_back({PipeOp::Kind::bwd, i, 0});
    }
    return ops;
}

// Depth-first chain on a single stage: all chunks of a microbatch forward,
// then backward, one microbatch at a time. Zero idle by construction.
StageSchedule single_stage(int v, int m) {
    StageSchedule ops;
    for (int mb = 0; mb < m; ++mb) {
        for (int c = 0; c < v; ++c) ops.push_back({PipeOp::Kind::fwd, mb, c});
        for (int c = v - 1; c >= 0; --c) ops.push_back({PipeOp::Kind::bwd, mb, c});
    }
    return ops;
}

// Interleaved 1F1B (requires m % pp == 0). The k-th forward of a stage works
// on microbatch (k / (pp*v))*pp + k%pp in local chunk (k % (pp*v)) / pp; the
// j-th backward mirrors the chunk index.
StageSchedule interleaved(int stage, int pp, int v, int m) {
    const int total = m * v;
    StageSchedule ops;

    auto fwd_of = [&](int k) -> PipeOp {
        const int group = k / (pp * v);
        return {PipeOp::Kind::fwd, group * pp + k % pp, (k % (pp * v)) / pp};
    };
    auto bwd_of = [&](int j) -> PipeOp {
        const int group = j / (pp * v);
        return {PipeOp::Kind::bwd, group * pp + j % pp, v - 1 - (j % (pp * v)) / pp};
    };

    int warmup = (pp - stage - 1) * 2 + (v - 1) * pp;
    if (m == pp) warmup = total;
    warmup = std::min(warmup, total);

    for (int k = 0; k < warmup; ++k) ops.push_back(fwd_of(k));
    for (int i = 0; i < total - warmup; ++i) {
        ops.push_back(fwd_of(warmup + i));
        ops.push_back(bwd_of(i));
    }
    for (int j = total - warmup; j < total; ++j) ops.push_back(bwd_of(j));
    return ops;
}

// Fallback for v > 1 with m % pp != 0: forwards in global dependency order,
// then backwards. Valid (wave order respects chunk chaining) but bubblier
// than interleaved 1F1B.
StageSchedule wave(int v, int m) {
    StageSchedule ops;
    for (int c = 0; c < v; ++c) {
        for (int mb = 0; mb < m; ++mb) ops.push_back({PipeOp::Kind::fwd, mb, c});
    }
    for (int c = v - 1; c >= 0; --c) {
        for (int mb = 0; mb < m; ++mb) ops.push_back({PipeOp::Kind::bwd, mb, c});
    }
    return ops;
}

}  // namespace

std::vector<StageSchedule> generate_schedule(const PipelineConfig& cfg) {
    cfg.validate();
    const int pp = cfg.pp_stages;
    const int v = cfg.virtual_chunks;
    const int m = cfg.microbatches;

    std::vector<StageSchedule> schedule;
    schedule.reserve(static_cast<std::size_t>(pp));
    for (int stage = 0; stage < pp; ++stage) {
        if (pp == 1) {
            schedule.push_back(single_stage(v, m));
        } else if (v == 1) {
            schedule.push_back(one_f_one_b(stage, pp, m));
        } else if (m % pp == 0) {
            schedule.push_back(interleaved(stage, pp, v, m));
        } else {
            if (stage == 0) {
                std::ostringstream os;
                os << "interleaved 1F1B needs microbatches divisible by pp_stages; "
                   << "falling back to a wave schedule for m=" << m << ", pp=" << pp;
                log::warn(os.str());
            }
            schedule.push_back(wave(v, m));
        }
    }
    return schedule;
}

}  // namespace omnisched
