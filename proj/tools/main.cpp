// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "omnisched/errors.hpp"
#include "omnisched/log.hpp"
#include "omnisched/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"omnisched: multimodal training-infrastructure scheduler and "
                 "discrete-event performance simulator"};
    app.require_subcommand(1);

    omnisched::RunOptions options;
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "Scenario config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", options.out_dir, "Output directory");
        cmd->add_option("--seed", seed, "Override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_flag("--trace,!--no-trace", options.write_trace,
                      "Write the Chrome-trace timeline (simulate/sweep)");
        cmd->add_option("--format", options.format, "Report format")
            ->check(CLI::IsMember({"json", "csv", "both"}));
    };

    const char* subcommands[] = {"simulate", "balance",     "comms",
                                 "attn-report", "reliability", "sweep"};
    const char* descriptions[] = {
        "Run the pipeline simulation and emit report + timeline",
        "Emit the DP assignment, encoder partition and UP plan",
        "Plan direct and two-tier all-to-all and compare link loads",
        "Window/asymmetric attention nnz, KV-cache costs, connectivity",
        "Fault-injection ETTR analysis and MTBF thresholds",
        "Cartesian parameter sweep of simulate"};
    for (std::size_t i = 0; i < 6; ++i) {
        add_common(app.add_subcommand(subcommands[i], descriptions[i]));
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (seed_set) options.seed_override = seed;
        const std::string name = app.get_subcommands().front()->get_name();
        const auto files = omnisched::run_subcommand(name, config, options);
        for (const auto& f : files) {
            omnisched::log::info("wrote " + f.string());
        }
        return 0;
    } catch (const omnisched::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const omnisched::InvariantError& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
}
