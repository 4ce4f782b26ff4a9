// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/trace.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace omnisched {

nlohmann::json chrome_trace(const ScheduleTrace& trace, const ClusterSpec& spec,
                            int stage_width) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& ev : trace.events) {
        std::ostringstream name;
        name << to_string(ev.kind);
        if (ev.microbatch >= 0) name << " mb" << ev.microbatch;
        if (ev.chunk >= 0) name << " c" << ev.chunk;
        const int device = ev.rank;  // global rank maps 1:1 onto devices
        nlohmann::json e{
            {"name", name.str()},
            {"cat", to_string(ev.kind)},
            {"ph", "X"},
            {"ts", ev.t_start * 1e6},
            {"dur", (ev.t_end - ev.t_start) * 1e6},
            {"pid", spec.node_of(device % spec.total_ranks())},
            {"tid", ev.rank},
        };
        events.push_back(std::move(e));
    }
    (void)stage_width;
    return events;
}

std::string events_csv(const ScheduleTrace& trace) {
    std::ostringstream os;
    os << "t_start,t_end,rank,kind,microbatch,chunk\n";
    char buf[64];
    for (const auto& ev : trace.events) {
        std::snprintf(buf, sizeof(buf), "%.9e,%.9e", ev.t_start, ev.t_end);
        os << buf << ',' << ev.rank << ',' << to_string(ev.kind) << ','
           << ev.microbatch << ',' << ev.chunk << '\n';
    }
    return os.str();
}

nlohmann::json run_report(const ScheduleTrace& trace) {
    nlohmann::json per_rank = nlohmann::json::array();
    for (std::size_t r = 0; r < trace.ranks.size(); ++r) {
        const auto& rm = trace.ranks[r];
        per_rank.push_back(nlohmann::json{
            {"rank", r},
            {"busy_seconds", rm.busy_seconds},
            {"idle_seconds", rm.idle_seconds},
            {"peak_memory_bytes", rm.peak_memory},
            {"memory_violation", rm.memory_violation},
        });
    }
    return nlohmann::json{
        {"step_time_seconds", trace.step_time},
        {"bubble_ratio", trace.bubble_ratio},
        {"allreduce_exposed_seconds", trace.allreduce_exposed_seconds},
        {"ranks", per_rank},
    };
}

std::string run_report_csv(const ScheduleTrace& trace) {
    std::ostringstream os;
    os << "rank,busy_seconds,idle_seconds,peak_memory_bytes,memory_violation\n";
    char buf[96];
    for (std::size_t r = 0; r < trace.ranks.size(); ++r) {
        const auto& rm = trace.ranks[r];
        std::snprintf(buf, sizeof(buf), "%zu,%.9e,%.9e,%" PRId64 ",%d", r,
                      rm.busy_seconds, rm.idle_seconds, rm.peak_memory,
                      rm.memory_violation ? 1 : 0);
        os << buf << '\n';
    }
    return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ValidationError("WriteError", "cannot write " + tmp.string());
        }
        out << content;
        if (!content.empty() && content.back() != '\n') out << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::string config_hash(const nlohmann::json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return std::string(buf);
}

}  // namespace omnisched
