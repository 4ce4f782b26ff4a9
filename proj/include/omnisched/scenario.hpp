// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "omnisched/errors.hpp"

namespace omnisched {

// Output selection shared by all subcommands.
struct RunOptions {
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed_override;
    bool write_trace = true;
    std::string format = "both";  // json | csv | both
};

// Executes one CLI subcommand against a scenario config file and writes its
// artifacts under out_dir. Returns the list of files written. Subcommands:
// simulate, balance, comms, attn-report, reliability, sweep.
std::vector<std::filesystem::path> run_subcommand(
    const std::string& subcommand, const std::filesystem::path& config_path,
    const RunOptions& options);

bool is_known_subcommand(const std::string& subcommand);

}  // namespace omnisched
