// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/reliability.hpp"

#include <cmath>
#include <sstream>

#include "omnisched/rng.hpp"

namespace omnisched {

void FaultModel::validate() const {
    if (!(mtbf > 0)) {
        throw ValidationError("InvalidFaultModel", "mtbf must be > 0");
    }
    if (detect_latency < 0 || restart_time < 0 || checkpoint_interval < 0 ||
        checkpoint_overhead < 0) {
        throw ValidationError("InvalidFaultModel",
                              "latencies, restart, interval and overhead must be >= 0");
    }
    if (checkpoint_interval == 0 && checkpoint_overhead > 0) {
        throw ValidationError("InvalidFaultModel",
                              "checkpoint_overhead requires a nonzero interval");
    }
}

FaultTimeline inject_faults(double productive_duration, const FaultModel& fm) {
    fm.validate();
    if (!(productive_duration > 0)) {
        throw ValidationError("InvalidFaultModel", "productive_duration must be > 0");
    }

    FaultTimeline tl;
    tl.productive = productive_duration;

    const double interval = fm.checkpoint_interval;
    if (interval > 0) {
        // Checkpoints complete instantaneously at interval boundaries of
        // productive progress; none is taken at the very end.
        std::int64_t count =
            static_cast<std::int64_t>(std::floor(productive_duration / interval));
        if (static_cast<double>(count) * interval >= productive_duration) --count;
        tl.checkpoints = count < 0 ? 0 : count;
    }

    double overhead = static_cast<double>(tl.checkpoints) * fm.checkpoint_overhead;

    if (std::isfinite(fm.mtbf)) {
        Rng rng(fm.rng_seed);
        double at = rng.exponential(fm.mtbf);
        while (at < productive_duration) {
            FaultEvent ev;
            ev.productive_at = at;
            ev.lost_work = interval > 0 ? std::fmod(at, interval) : 0.0;
            overhead += fm.detect_latency + fm.restart_time + ev.lost_work;
            tl.faults.push_back(ev);
            at += rng.exponential(fm.mtbf);
        }
    }

    tl.wall_clock = productive_duration + overhead;
    return tl;
}

double ettr(const FaultTimeline& timeline) {
    if (!(timeline.wall_clock > 0)) {
        throw ValidationError("InvalidFaultModel", "timeline has no wall-clock time");
    }
    return timeline.productive / timeline.wall_clock;
}

double analytic_ettr(const FaultModel& fm) {
    fm.validate();
    const double ckpt_rate = fm.checkpoint_interval > 0
                                 ? fm.checkpoint_overhead / fm.checkpoint_interval
                                 : 0.0;
    const double per_fault =
        fm.detect_latency + fm.restart_time + fm.checkpoint_interval / 2.0;
    const double fault_rate = std::isfinite(fm.mtbf) ? per_fault / fm.mtbf : 0.0;
    return 1.0 / (1.0 + ckpt_rate + fault_rate);
}

MonteCarloEttr monte_carlo_ettr(double productive_duration_per_trial,
                                const FaultModel& fm, int trials) {
    if (trials < 1) {
        throw ValidationError("InvalidFaultModel", "trials must be >= 1");
    }
    std::vector<double> walls;
    walls.reserve(static_cast<std::size_t>(trials));
    double wall_sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        FaultModel trial_fm = fm;
        trial_fm.rng_seed = fm.rng_seed + static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL;
        const FaultTimeline tl = inject_faults(productive_duration_per_trial, trial_fm);
        walls.push_back(tl.wall_clock);
        wall_sum += tl.wall_clock;
    }
    const double n = static_cast<double>(trials);
    const double mean_wall = wall_sum / n;
    double var = 0.0;
    for (double w : walls) var += (w - mean_wall) * (w - mean_wall);
    var = trials > 1 ? var / (n - 1.0) : 0.0;

    MonteCarloEttr out;
    out.trials = trials;
    // Pooled ratio sum(productive)/sum(wall) = D / mean(wall); delta-method
    // standard error.
    out.ettr = productive_duration_per_trial / mean_wall;
    out.std_error = productive_duration_per_trial / (mean_wall * mean_wall) *
                    std::sqrt(var / n);
    return out;
}

double mtbf_threshold_for_target(const FaultModel& fm, double target) {
    if (!(target > 0) || !(target < 1)) {
        throw ValidationError("InvalidFaultModel", "target must be in (0,1)");
    }
    FaultModel check = fm;
    check.mtbf = std::numeric_limits<double>::infinity();
    check.validate();

    const double ckpt_rate = fm.checkpoint_interval > 0
                                 ? fm.checkpoint_overhead / fm.checkpoint_interval
                                 : 0.0;
    const double budget = 1.0 / target - 1.0 - ckpt_rate;
    if (budget <= 0) {
        std::ostringstream os;
        os << "checkpoint overhead caps ETTR at " << 1.0 / (1.0 + ckpt_rate)
           << " < target " << target;
        throw ValidationError("TargetUnreachable", os.str());
    }
    const double per_fault =
        fm.detect_latency + fm.restart_time + fm.checkpoint_interval / 2.0;
    return per_fault / budget;
}

}  // namespace omnisched
