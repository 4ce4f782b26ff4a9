// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "omnisched/cluster.hpp"
#include "omnisched/pipesim.hpp"

#include <nlohmann/json_fwd.hpp>

namespace omnisched {

// Chrome trace event format: an array of complete ("ph":"X") duration events
// with name, cat, ts/dur in microseconds, pid = node, tid = rank.
nlohmann::json chrome_trace(const ScheduleTrace& trace, const ClusterSpec& spec,
                            int stage_width);

// Flat event table: t_start,t_end,rank,kind,microbatch,chunk per row.
std::string events_csv(const ScheduleTrace& trace);

// Run metrics as flat JSON (step time, bubble ratio, per-rank occupancy and
// peak memory).
nlohmann::json run_report(const ScheduleTrace& trace);
std::string run_report_csv(const ScheduleTrace& trace);

// Writes atomically (temp file + rename) with a trailing newline.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// FNV-1a hash of a canonical JSON dump; embedded in every report so outputs
// are attributable to (config, seed).
std::string config_hash(const nlohmann::json& config);

}  // namespace omnisched
