// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "omnisched/errors.hpp"

namespace omnisched {

// Failure/recovery parameters of a training run. Defaults follow the
// minute-level operational envelope: detection within a minute, sub-minute
// restart, non-blocking checkpoints (zero overhead).
struct FaultModel {
    double mtbf = std::numeric_limits<double>::infinity();  // exponential inter-arrival
    double detect_latency = 60.0;
    double restart_time = 60.0;
    double checkpoint_interval = 600.0;
    double checkpoint_overhead = 0.0;  // per checkpoint; async default 0
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct FaultEvent {
    double productive_at = 0.0;  // productive progress when the fault struck
    double lost_work = 0.0;      // time since the last completed checkpoint
};

// Wall-clock accounting of one run. Faults are a seeded Poisson process on
// the productive-time axis; each fault inserts detection + restart + the
// redone work into the wall clock, and progress continues until the full
// productive duration is reached.
struct FaultTimeline {
    double productive = 0.0;
    double wall_clock = 0.0;
    std::int64_t checkpoints = 0;
    std::vector<FaultEvent> faults;
};

FaultTimeline inject_faults(double productive_duration, const FaultModel& fm);

// productive_time / wall_clock_time of a timeline.
double ettr(const FaultTimeline& timeline);

// First-order renewal expectation:
//   1 / (1 + checkpoint_overhead/interval + (detect + restart + interval/2) / mtbf)
double analytic_ettr(const FaultModel& fm);

// Pooled Monte-Carlo estimate over independent seeded trials, with the
// standard error of the pooled ratio.
struct MonteCarloEttr {
    double ettr = 0.0;
    double std_error = 0.0;
    int trials = 0;
};
MonteCarloEttr monte_carlo_ettr(double productive_duration_per_trial,
                                const FaultModel& fm, int trials);

// Smallest mtbf whose analytic ETTR reaches the target. Throws
// ValidationError("TargetUnreachable", ...) when checkpoint overhead alone
// caps ETTR below the target.
double mtbf_threshold_for_target(const FaultModel& fm, double target);

}  // namespace omnisched
