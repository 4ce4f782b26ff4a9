// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnisched/scenario.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omnisched/attnwin.hpp"
#include "omnisched/balancer.hpp"
#include "omnisched/cluster.hpp"
#include "omnisched/comms.hpp"
#include "omnisched/log.hpp"
#include "omnisched/pipesim.hpp"
#include "omnisched/reliability.hpp"
#include "omnisched/rng.hpp"
#include "omnisched/trace.hpp"
#include "omnisched/workload.hpp"

namespace omnisched {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("FileNotFound", "cannot open config: " + path.string());
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ValidationError("ParseError", path.string() + ": " + e.what());
    }
}

// Scenario-wide context resolved from one config file.
struct Scenario {
    json config;
    fs::path config_dir;
    std::uint64_t seed = 0;
    std::string hash;

    ClusterSpec cluster = default_cluster();
    ModelShape shape = default_model_shape();

    fs::path resolve(const std::string& rel) const {
        const fs::path p(rel);
        return p.is_absolute() ? p : config_dir / p;
    }

    const json& section(const char* name) const {
        if (!config.contains(name)) {
            throw ValidationError("MissingSection",
                                  std::string("config lacks required section '") +
                                      name + "'");
        }
        return config.at(name);
    }
};

Scenario load_scenario(const fs::path& config_path, const RunOptions& options) {
    Scenario sc;
    sc.config = load_json(config_path);
    sc.config_dir = config_path.parent_path();
    if (options.seed_override.has_value()) {
        sc.config["seed"] = options.seed_override.value();
    }
    if (!sc.config.contains("seed")) {
        throw ValidationError("MissingSeed",
                              "config field 'seed' is mandatory (no wall-clock default)");
    }
    sc.seed = sc.config.at("seed").get<std::uint64_t>();
    sc.hash = config_hash(sc.config);

    if (sc.config.contains("cluster")) {
        sc.cluster = load_cluster(sc.resolve(sc.config.at("cluster").get<std::string>()));
    }
    if (sc.config.contains("model")) {
        sc.shape = model_shape_from_json(sc.config.at("model"));
    }
    return sc;
}

json report_header(const Scenario& sc) {
    return json{{"config_hash", sc.hash}, {"seed", sc.seed}};
}

std::vector<Sample> scenario_workload(const Scenario& sc) {
    if (!sc.config.contains("workload")) {
        throw ValidationError("MissingSection", "config lacks 'workload' path");
    }
    return load_workload(sc.resolve(sc.config.at("workload").get<std::string>()));
}

struct BalanceOptions {
    int dp_groups = 1;
    std::vector<int> up_options{1};
    std::int64_t per_rank_token_cap = 0;  // 0 -> no cap (capacity used)
    std::string load_mode = "total_tokens";
};

BalanceOptions balance_options(const Scenario& sc) {
    BalanceOptions b;
    if (!sc.config.contains("balance")) return b;
    const json& j = sc.config.at("balance");
    b.dp_groups = j.value("dp_groups", 1);
    if (j.contains("up_options")) {
        b.up_options = j.at("up_options").get<std::vector<int>>();
        std::sort(b.up_options.begin(), b.up_options.end());
    }
    b.per_rank_token_cap = j.value("per_rank_token_cap", std::int64_t{0});
    b.load_mode = j.value("load", std::string("total_tokens"));
    if (b.load_mode != "total_tokens" && b.load_mode != "encoder_weighted") {
        throw ValidationError("InvalidConfig",
                              "balance.load must be total_tokens or encoder_weighted");
    }
    return b;
}

double sample_load(const Sample& s, const std::string& mode) {
    const double tokens = static_cast<double>(s.total_tokens());
    return mode == "encoder_weighted" ? s.encoder_weight * tokens : tokens;
}

PipelineConfig pipeline_config(const Scenario& sc) {
    PipelineConfig cfg;
    if (!sc.config.contains("pipeline")) return cfg;
    const json& j = sc.config.at("pipeline");
    cfg.pp_stages = j.value("pp_stages", 1);
    cfg.virtual_chunks = j.value("virtual_chunks", 1);
    cfg.layers_per_chunk = j.value("layers_per_chunk", 1);
    cfg.offload_policy =
        offload_policy_from_string(j.value("offload_policy", std::string("none")));
    cfg.recompute_budget = j.value("recompute_budget", 0.0);
    cfg.onload_lead_events = j.value("onload_lead_events", 2);
    cfg.encoder_overlap = j.value("encoder_overlap", false);
    return cfg;
}

std::vector<RecomputeItem> recompute_catalog(const Scenario& sc) {
    std::vector<RecomputeItem> catalog;
    if (!sc.config.contains("recompute_catalog")) return catalog;
    for (const auto& j : sc.config.at("recompute_catalog")) {
        RecomputeItem item;
        item.name = j.at("name").get<std::string>();
        item.bytes_saved = j.at("bytes_saved").get<std::int64_t>();
        item.recompute_seconds = j.at("recompute_seconds").get<double>();
        catalog.push_back(std::move(item));
    }
    return catalog;
}

// Microbatch work derived from the packed workload (or the synthetic block
// for analytic fixtures).
std::vector<MicrobatchWork> build_microbatches(const Scenario& sc,
                                               const PipelineConfig& cfg) {
    std::vector<MicrobatchWork> out;
    if (sc.config.contains("synthetic")) {
        const json& j = sc.config.at("synthetic");
        const int m = j.at("microbatches").get<int>();
        for (int i = 0; i < m; ++i) {
            MicrobatchWork w;
            std::ostringstream id;
            id << "mb" << i;
            w.id = id.str();
            w.tokens = j.value("tokens", std::int64_t{0});
            w.attn_nnz = j.value("attn_nnz", w.tokens * w.tokens);
            w.fwd_seconds_per_chunk = j.value("fwd_seconds", 0.0);
            w.bwd_seconds_per_chunk = j.value("bwd_seconds", 0.0);
            w.act_bytes_per_chunk = j.value("act_bytes", std::int64_t{0});
            w.input_bytes_per_chunk = j.value("input_bytes", std::int64_t{0});
            w.input_prep_seconds_per_chunk = j.value("input_prep_seconds", 0.0);
            w.p2p_bytes = j.value("p2p_bytes", std::int64_t{0});
            out.push_back(std::move(w));
        }
        return out;
    }

    const auto samples = scenario_workload(sc);
    std::int64_t capacity = 4096;
    MaskPolicy policy = MaskPolicy::full_within_sample;
    if (sc.config.contains("packing")) {
        capacity = sc.config.at("packing").value("capacity", std::int64_t{4096});
        policy = mask_policy_from_string(sc.config.at("packing").value(
            "mask_policy", std::string("full_within_sample")));
    }
    const auto sequences = pack_samples(samples, capacity);
    int i = 0;
    for (const auto& seq : sequences) {
        MicrobatchWork w;
        std::ostringstream id;
        id << "mb" << i++;
        w.id = id.str();
        w.tokens = seq.used_tokens();
        w.attn_nnz = mask_nnz(build_mask(seq, policy));
        const double layer =
            layer_compute_time(sc.shape, w.tokens, w.attn_nnz, sc.cluster);
        w.fwd_seconds_per_chunk = layer * cfg.layers_per_chunk;
        w.bwd_seconds_per_chunk = 2.0 * w.fwd_seconds_per_chunk;
        w.act_bytes_per_chunk =
            w.tokens * sc.shape.bytes_per_token_activation * cfg.layers_per_chunk;
        w.p2p_bytes = w.tokens * sc.shape.hidden_dim * sc.shape.bytes_per_element;
        out.push_back(std::move(w));
    }
    return out;
}

// Per-microbatch UP degrees: "elastic" chooses per microbatch, an integer
// pins a static degree for every microbatch.
UpPlan build_up_plan(const Scenario& sc, const BalanceOptions& bal,
                     const std::vector<MicrobatchWork>& microbatches) {
    UpPlan plan;
    std::string mode = "elastic";
    if (sc.config.contains("pipeline")) {
        const json& j = sc.config.at("pipeline");
        if (j.contains("up")) {
            if (j.at("up").is_number_integer()) {
                mode = "static";
            } else {
                mode = j.at("up").get<std::string>();
            }
        }
    }
    const std::int64_t cap = bal.per_rank_token_cap > 0
                                 ? bal.per_rank_token_cap
                                 : std::numeric_limits<std::int64_t>::max();
    for (const auto& w : microbatches) {
        UpPlanEntry entry;
        entry.microbatch_id = w.id;
        if (mode == "static") {
            entry.up_degree = sc.config.at("pipeline").at("up").get<int>();
        } else if (mode == "elastic") {
            entry.up_degree = w.tokens > 0
                                  ? choose_up_degree(w.tokens, bal.up_options, cap,
                                                     sc.shape, sc.cluster)
                                  : 1;
        } else {
            throw ValidationError("InvalidConfig",
                                  "pipeline.up must be 'elastic' or an integer");
        }
        for (int l = 0; l < entry.up_degree; ++l) entry.member_ranks.push_back(l);
        plan.entries.push_back(std::move(entry));
    }
    return plan;
}

int up_degree_of(const UpPlan& plan, const std::string& id) {
    for (const auto& e : plan.entries) {
        if (e.microbatch_id == id) return e.up_degree;
    }
    return 1;
}

struct GroupSim {
    ScheduleTrace trace;
    int microbatches = 0;
};

// Simulates the DiT pipeline of every DP group and merges metrics. Encoder
// loads come from the sample->group assignment partitioned across stages.
json run_simulate_impl(const Scenario& sc, const RunOptions& options,
                       std::vector<fs::path>& files) {
    const BalanceOptions bal = balance_options(sc);
    PipelineConfig cfg = pipeline_config(sc);
    const auto catalog = recompute_catalog(sc);
    auto microbatches = build_microbatches(sc, cfg);
    if (microbatches.empty()) {
        throw ValidationError("InvalidConfig", "scenario produced no microbatches");
    }
    const UpPlan plan = build_up_plan(sc, bal, microbatches);
    cfg.stage_width = 1;
    for (const auto& e : plan.entries) cfg.stage_width = std::max(cfg.stage_width, e.up_degree);
    for (int u : bal.up_options) cfg.stage_width = std::max(cfg.stage_width, u);

    // Distribute microbatches across DP groups by modeled time.
    std::vector<MicrobatchItem> items;
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < microbatches.size(); ++i) {
        const auto& w = microbatches[i];
        index_of[w.id] = i;
        const int u = up_degree_of(plan, w.id);
        const double seconds =
            w.tokens > 0 ? modeled_microbatch_seconds(w.tokens, u, sc.shape, sc.cluster)
                         : (w.fwd_seconds_per_chunk + w.bwd_seconds_per_chunk);
        items.push_back({w.id, seconds});
    }
    const auto groups = reorder_microbatches(items, bal.dp_groups);

    // Encoder loads per group, partitioned across stages.
    std::vector<std::vector<double>> encoder_per_group;
    double encoder_unit = 0.0;
    if (sc.config.contains("encoder")) {
        encoder_unit =
            sc.config.at("encoder").value("seconds_per_weighted_token", 0.0);
    }
    if (encoder_unit > 0 && sc.config.contains("workload")) {
        const auto samples = scenario_workload(sc);
        std::map<std::string, const Sample*> by_id;
        for (const auto& s : samples) by_id[s.id] = &s;
        const auto assignment =
            assign_to_dp(samples, bal.dp_groups, [&](const Sample& s) {
                return s.encoder_weight * static_cast<double>(s.total_tokens());
            });
        for (const auto& group : assignment.groups) {
            std::vector<double> loads;
            for (const auto& id : group.sample_ids) {
                const Sample* s = by_id.at(id);
                loads.push_back(s->encoder_weight *
                                static_cast<double>(s->total_tokens()));
            }
            std::vector<double> seconds(static_cast<std::size_t>(cfg.pp_stages), 0.0);
            if (!loads.empty()) {
                const auto partition = partition_encoder_tokens(loads, cfg.pp_stages);
                for (int s = 0; s < cfg.pp_stages; ++s) {
                    seconds[s] = partition.ranges[s].load * encoder_unit;
                }
            }
            encoder_per_group.push_back(std::move(seconds));
        }
    }

    const bool include_allreduce = sc.config.value("allreduce", false);

    std::vector<GroupSim> sims;
    double step_time = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) continue;
        PipelineConfig gcfg = cfg;
        gcfg.microbatches = static_cast<int>(groups[g].size());

        SimInputs inputs;
        for (const auto& item : groups[g]) {
            inputs.microbatches.push_back(microbatches[index_of.at(item.id)]);
        }
        UpPlan gplan;
        for (const auto& e : plan.entries) {
            for (const auto& item : groups[g]) {
                if (e.microbatch_id == item.id) gplan.entries.push_back(e);
            }
        }
        gcfg.up_plan = gplan;
        if (g < encoder_per_group.size()) {
            inputs.encoder_seconds_per_stage = encoder_per_group[g];
        }
        inputs.recompute_catalog = catalog;
        if (!catalog.empty() && cfg.recompute_budget > 0) {
            inputs.recompute_selection = select_recompute(catalog, cfg.recompute_budget);
        }
        if (sc.config.contains("reuse_groups")) {
            inputs.reuse.groups =
                sc.config.at("reuse_groups").get<std::vector<std::vector<int>>>();
        }
        if (include_allreduce) {
            inputs.dp_groups = bal.dp_groups;
            inputs.grad_bytes_per_rank = sc.shape.params_per_layer() *
                                         cfg.layers_per_chunk * cfg.virtual_chunks *
                                         sc.shape.bytes_per_element;
        }
        const auto schedule = generate_schedule(gcfg);
        GroupSim sim;
        sim.trace = simulate(schedule, inputs, sc.cluster, gcfg, sc.shape);
        sim.microbatches = gcfg.microbatches;
        step_time = std::max(step_time, sim.trace.step_time);
        sims.push_back(std::move(sim));
    }

    // Aggregate report.
    json report = report_header(sc);
    report["step_time_seconds"] = step_time;
    double bubble_sum = 0.0;
    double busy_max = 0.0, busy_total = 0.0;
    json group_reports = json::array();
    for (std::size_t g = 0; g < sims.size(); ++g) {
        const auto& tr = sims[g].trace;
        json gr = run_report(tr);
        gr["dp_group"] = g;
        gr["microbatches"] = sims[g].microbatches;
        group_reports.push_back(std::move(gr));
        bubble_sum += tr.bubble_ratio;
        double busy = 0.0;
        for (const auto& rm : tr.ranks) busy += rm.busy_seconds;
        busy_max = std::max(busy_max, busy);
        busy_total += busy;
    }
    report["groups"] = group_reports;
    report["bubble_ratio"] = sims.size() == 1 ? sims[0].trace.bubble_ratio
                                              : bubble_sum / static_cast<double>(
                                                                 sims.empty() ? 1 : sims.size());
    const double busy_mean =
        sims.empty() ? 0.0 : busy_total / static_cast<double>(sims.size());
    json imbalance;
    imbalance["max_over_mean_group_load"] = busy_mean > 0 ? busy_max / busy_mean : 1.0;
    double idle_fraction_sum = 0.0;
    int rank_count = 0;
    for (const auto& sim : sims) {
        for (const auto& rm : sim.trace.ranks) {
            idle_fraction_sum += step_time > 0
                                     ? (step_time - rm.busy_seconds) / step_time
                                     : 0.0;
            ++rank_count;
        }
    }
    imbalance["mean_idle_fraction"] =
        rank_count > 0 ? idle_fraction_sum / rank_count : 0.0;
    report["imbalance"] = imbalance;

    // Artifacts.
    if (options.format != "csv") {
        const fs::path p = options.out_dir / "report.json";
        write_file_atomic(p, report.dump(2));
        files.push_back(p);
    }
    if (options.format != "json") {
        std::ostringstream csv;
        csv << "dp_group,rank,busy_seconds,idle_seconds,peak_memory_bytes,memory_violation\n";
        char buf[128];
        for (std::size_t g = 0; g < sims.size(); ++g) {
            const auto& tr = sims[g].trace;
            for (std::size_t r = 0; r < tr.ranks.size(); ++r) {
                const auto& rm = tr.ranks[r];
                std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9e,%.9e,%" PRId64 ",%d", g,
                              r, rm.busy_seconds, rm.idle_seconds, rm.peak_memory,
                              rm.memory_violation ? 1 : 0);
                csv << buf << '\n';
            }
        }
        const fs::path p = options.out_dir / "report.csv";
        write_file_atomic(p, csv.str());
        files.push_back(p);
    }
    if (options.write_trace) {
        json merged = json::array();
        for (std::size_t g = 0; g < sims.size(); ++g) {
            json part = chrome_trace(sims[g].trace, sc.cluster, cfg.stage_width);
            for (auto& ev : part) {
                // Distinct pid space per DP group so merged timelines stay
                // readable in a viewer.
                ev["pid"] = static_cast<int>(g) * sc.cluster.num_nodes +
                            ev.at("pid").get<int>();
                merged.push_back(std::move(ev));
            }
        }
        const fs::path p = options.out_dir / "trace.json";
        write_file_atomic(p, merged.dump());
        files.push_back(p);
    }
    return report;
}

json run_balance_impl(const Scenario& sc, const RunOptions& options,
                      std::vector<fs::path>& files) {
    const BalanceOptions bal = balance_options(sc);
    const auto samples = scenario_workload(sc);
    const PipelineConfig cfg = pipeline_config(sc);

    const auto assignment = assign_to_dp(samples, bal.dp_groups, [&](const Sample& s) {
        return sample_load(s, bal.load_mode);
    });

    json groups = json::array();
    std::map<std::string, const Sample*> by_id;
    for (const auto& s : samples) by_id[s.id] = &s;
    for (const auto& group : assignment.groups) {
        json g{{"group_id", group.group_id},
               {"load", group.load},
               {"sample_ids", group.sample_ids}};
        std::vector<double> encoder_loads;
        for (const auto& id : group.sample_ids) {
            const Sample* s = by_id.at(id);
            encoder_loads.push_back(s->encoder_weight *
                                    static_cast<double>(s->total_tokens()));
        }
        json ranges = json::array();
        if (!encoder_loads.empty()) {
            const auto partition =
                partition_encoder_tokens(encoder_loads, cfg.pp_stages);
            for (const auto& r : partition.ranges) {
                ranges.push_back(json{{"begin", r.begin}, {"end", r.end},
                                      {"load", r.load}});
            }
        }
        g["encoder_partition"] = ranges;
        groups.push_back(std::move(g));
    }

    auto microbatches = build_microbatches(sc, cfg);
    const UpPlan plan = build_up_plan(sc, bal, microbatches);
    json up_entries = json::array();
    for (const auto& e : plan.entries) {
        up_entries.push_back(json{{"microbatch_id", e.microbatch_id},
                                  {"up_degree", e.up_degree},
                                  {"member_ranks", e.member_ranks}});
    }

    json report = report_header(sc);
    report["assignment"] = json{{"groups", groups}};
    report["up_plan"] = up_entries;
    const double mean = assignment.mean_load();
    report["imbalance"] =
        json{{"max_load", assignment.max_load()},
             {"mean_load", mean},
             {"max_over_mean", mean > 0 ? assignment.max_load() / mean : 1.0}};

    const fs::path p = options.out_dir / "balance.json";
    write_file_atomic(p, report.dump(2));
    files.push_back(p);
    if (options.format != "json") {
        std::ostringstream csv;
        csv << "microbatch_id,up_degree\n";
        for (const auto& e : plan.entries) {
            csv << e.microbatch_id << ',' << e.up_degree << '\n';
        }
        const fs::path pc = options.out_dir / "up_plan.csv";
        write_file_atomic(pc, csv.str());
        files.push_back(pc);
    }
    return report;
}

TransferMatrix scenario_matrix(const Scenario& sc) {
    const json& j = sc.section("comms");
    TransferMatrix m;
    m.num_ranks = sc.cluster.total_ranks();
    if (j.contains("matrix")) {
        m.bytes = j.at("matrix").get<std::vector<std::vector<std::int64_t>>>();
        m.num_ranks = static_cast<int>(m.bytes.size());
    } else if (j.contains("uniform_bytes")) {
        const std::int64_t b = j.at("uniform_bytes").get<std::int64_t>();
        m.bytes.assign(m.num_ranks, std::vector<std::int64_t>(m.num_ranks, b));
        for (int r = 0; r < m.num_ranks; ++r) m.bytes[r][r] = 0;
    } else if (j.contains("random_max_bytes")) {
        Rng rng(sc.seed);
        const std::int64_t hi = j.at("random_max_bytes").get<std::int64_t>();
        m.bytes.assign(m.num_ranks, std::vector<std::int64_t>(m.num_ranks, 0));
        for (int s = 0; s < m.num_ranks; ++s) {
            for (int d = 0; d < m.num_ranks; ++d) {
                if (s != d) m.bytes[s][d] = rng.uniform_int(0, hi);
            }
        }
    } else {
        throw ValidationError("InvalidConfig",
                              "comms needs matrix, uniform_bytes or random_max_bytes");
    }
    m.validate();
    return m;
}

json plan_summary(const CommPlan& plan, const PlanCost& cost) {
    json uplinks = json::array();
    for (std::size_t n = 0; n < cost.uplink.size(); ++n) {
        uplinks.push_back(json{{"node", n},
                               {"bytes", cost.uplink[n].bytes},
                               {"messages", cost.uplink[n].messages},
                               {"seconds", cost.uplink[n].seconds}});
    }
    json phases = json::array();
    for (std::size_t p = 0; p < plan.phases.size(); ++p) {
        phases.push_back(json{{"phase", p},
                              {"messages", plan.phases[p].size()},
                              {"seconds", cost.phase_seconds[p]}});
    }
    return json{{"total_seconds", cost.total_seconds},
                {"inter_messages", inter_node_message_count(plan)},
                {"inter_bytes", inter_node_bytes(plan)},
                {"phases", phases},
                {"uplinks", uplinks}};
}

json run_comms_impl(const Scenario& sc, const RunOptions& options,
                    std::vector<fs::path>& files) {
    const TransferMatrix m = scenario_matrix(sc);
    const auto direct = plan_direct(m, sc.cluster);
    const auto two_tier = plan_two_tier(m, sc.cluster);
    const auto direct_cost = plan_cost(direct, sc.cluster);
    const auto two_tier_cost = plan_cost(two_tier, sc.cluster);

    json report = report_header(sc);
    report["direct"] = plan_summary(direct, direct_cost);
    report["two_tier"] = plan_summary(two_tier, two_tier_cost);
    const auto dm = inter_node_message_count(direct);
    const auto tm = inter_node_message_count(two_tier);
    report["relief"] = json{
        {"inter_message_ratio",
         tm > 0 ? static_cast<double>(dm) / static_cast<double>(tm) : 0.0},
        {"total_time_ratio", two_tier_cost.total_seconds > 0
                                 ? direct_cost.total_seconds / two_tier_cost.total_seconds
                                 : 0.0}};

    const fs::path p = options.out_dir / "comms.json";
    write_file_atomic(p, report.dump(2));
    files.push_back(p);
    if (options.format != "json") {
        std::ostringstream csv;
        csv << "plan,node,uplink_bytes,uplink_messages,uplink_seconds\n";
        char buf[128];
        for (std::size_t n = 0; n < direct_cost.uplink.size(); ++n) {
            std::snprintf(buf, sizeof(buf), "direct,%zu,%" PRId64 ",%" PRId64 ",%.9e",
                          n, direct_cost.uplink[n].bytes,
                          direct_cost.uplink[n].messages, direct_cost.uplink[n].seconds);
            csv << buf << '\n';
        }
        for (std::size_t n = 0; n < two_tier_cost.uplink.size(); ++n) {
            std::snprintf(buf, sizeof(buf), "two_tier,%zu,%" PRId64 ",%" PRId64 ",%.9e",
                          n, two_tier_cost.uplink[n].bytes,
                          two_tier_cost.uplink[n].messages,
                          two_tier_cost.uplink[n].seconds);
            csv << buf << '\n';
        }
        const fs::path pc = options.out_dir / "comms.csv";
        write_file_atomic(pc, csv.str());
        files.push_back(pc);
    }
    return report;
}

std::string dense_pgm(const std::vector<std::vector<bool>>& dense) {
    std::ostringstream os;
    os << "P2\n" << dense.size() << ' ' << dense.size() << "\n1\n";
    for (const auto& row : dense) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            os << (row[k] ? 1 : 0) << (k + 1 == row.size() ? '\n' : ' ');
        }
    }
    return os.str();
}

std::string dense_csv(const std::vector<std::vector<bool>>& dense) {
    std::ostringstream os;
    for (const auto& row : dense) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            os << (row[k] ? 1 : 0) << (k + 1 == row.size() ? '\n' : ',');
        }
    }
    return os.str();
}

json run_attn_report_impl(const Scenario& sc, const RunOptions& options,
                          std::vector<fs::path>& files) {
    const json& j = sc.section("attn");
    TokenGrid grid;
    if (j.contains("grid")) {
        grid.t = j.at("grid").value("t", std::int64_t{1});
        grid.h = j.at("grid").value("h", std::int64_t{1});
        grid.w = j.at("grid").value("w", std::int64_t{1});
    }
    grid.condition_prefix = j.value("condition_prefix", std::int64_t{0});
    WindowSpec win;
    if (j.contains("window")) {
        win.wt = j.at("window").value("wt", std::int64_t{1});
        win.wh = j.at("window").value("wh", std::int64_t{1});
        win.ww = j.at("window").value("ww", std::int64_t{1});
    }
    const int steps = j.value("steps", 10);
    const bool exempt = j.value("exempt_prefix", false);

    const auto even = build_window_mask(grid, win, LayerParity::even, exempt);
    const auto odd = build_window_mask(grid, win, LayerParity::odd, exempt);
    const auto condition = grid.condition_indices();
    const auto asym = build_asymmetric_mask(grid.total_tokens(), condition);
    const auto composed_even = compose_masks(even, asym);
    const auto composed_odd = compose_masks(odd, asym);

    const std::int64_t n = grid.total_tokens();
    json report = report_header(sc);
    report["tokens"] = n;
    report["full_nnz"] = n * n;
    report["window_even_nnz"] = mask_nnz(even);
    report["window_odd_nnz"] = mask_nnz(odd);
    report["asymmetric_nnz"] = mask_nnz(asym);
    report["composed_even_nnz"] = mask_nnz(composed_even);
    report["composed_odd_nnz"] = mask_nnz(composed_odd);
    report["connectivity_diameter_pairs"] = connectivity_diameter(grid, win);

    const auto costs =
        kv_cache_step_costs(asym, condition, sc.shape, steps, sc.cluster);
    report["kv_cache_step_costs_seconds"] = costs;
    report["kv_cache_speedup_steady"] =
        costs.size() > 1 && costs[1] > 0 ? costs[0] / costs[1] : 1.0;

    const fs::path p = options.out_dir / "attn_report.json";
    write_file_atomic(p, report.dump(2));
    files.push_back(p);

    if (j.value("dump_dense", false)) {
        if (n > 128) {
            throw ValidationError("InvalidConfig",
                                  "dense dumps are limited to 128 tokens (attn.grid)");
        }
        const struct {
            const char* name;
            const MaskSpec* mask;
        } dumps[] = {{"mask_even", &even},
                     {"mask_odd", &odd},
                     {"mask_asymmetric", &asym},
                     {"mask_composed_even", &composed_even}};
        for (const auto& d : dumps) {
            const auto dense = dense_mask(*d.mask);
            const fs::path pgm = options.out_dir / (std::string(d.name) + ".pgm");
            write_file_atomic(pgm, dense_pgm(dense));
            files.push_back(pgm);
            const fs::path csv = options.out_dir / (std::string(d.name) + ".csv");
            write_file_atomic(csv, dense_csv(dense));
            files.push_back(csv);
        }
    }
    return report;
}

json run_reliability_impl(const Scenario& sc, const RunOptions& options,
                          std::vector<fs::path>& files) {
    const json& j = sc.section("reliability");
    FaultModel fm;
    fm.mtbf = j.value("mtbf", fm.mtbf);
    fm.detect_latency = j.value("detect_latency", fm.detect_latency);
    fm.restart_time = j.value("restart_time", fm.restart_time);
    fm.checkpoint_interval = j.value("checkpoint_interval", fm.checkpoint_interval);
    fm.checkpoint_overhead = j.value("checkpoint_overhead", fm.checkpoint_overhead);
    fm.rng_seed = sc.seed;
    fm.validate();

    const double duration = j.value("productive_duration", 100000.0);
    const int trials = j.value("trials", 10000);
    std::vector<double> targets{0.9, 0.95, 0.97, 0.99};
    if (j.contains("targets")) targets = j.at("targets").get<std::vector<double>>();

    const auto mc = monte_carlo_ettr(duration, fm, trials);

    json report = report_header(sc);
    report["fault_model"] = json{{"mtbf", fm.mtbf},
                                 {"detect_latency", fm.detect_latency},
                                 {"restart_time", fm.restart_time},
                                 {"checkpoint_interval", fm.checkpoint_interval},
                                 {"checkpoint_overhead", fm.checkpoint_overhead}};
    report["analytic_ettr"] = analytic_ettr(fm);
    report["monte_carlo_ettr"] = mc.ettr;
    report["monte_carlo_std_error"] = mc.std_error;
    report["trials"] = mc.trials;
    json thresholds = json::array();
    for (double target : targets) {
        json row{{"target", target}};
        try {
            row["mtbf_threshold_seconds"] = mtbf_threshold_for_target(fm, target);
        } catch (const ValidationError& e) {
            row["error"] = e.what();
        }
        thresholds.push_back(std::move(row));
    }
    report["mtbf_thresholds"] = thresholds;

    const fs::path p = options.out_dir / "reliability.json";
    write_file_atomic(p, report.dump(2));
    files.push_back(p);
    if (options.format != "json") {
        std::ostringstream csv;
        csv << "target,mtbf_threshold_seconds\n";
        char buf[64];
        for (const auto& row : thresholds) {
            if (!row.contains("mtbf_threshold_seconds")) continue;
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f",
                          row.at("target").get<double>(),
                          row.at("mtbf_threshold_seconds").get<double>());
            csv << buf << '\n';
        }
        const fs::path pc = options.out_dir / "reliability.csv";
        write_file_atomic(pc, csv.str());
        files.push_back(pc);
    }
    return report;
}

void apply_override(json& config, const std::string& dotted, const json& value) {
    json* node = &config;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', pos);
        const std::string key = dotted.substr(pos, dot - pos);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

json run_sweep_impl(const Scenario& sc, const fs::path& config_path,
                    const RunOptions& options, std::vector<fs::path>& files) {
    const json& grid = sc.section("sweep");
    json base;
    if (sc.config.contains("base")) {
        base = load_json(sc.resolve(sc.config.at("base").get<std::string>()));
    } else {
        base = sc.config;
        base.erase("sweep");
    }
    if (!base.contains("seed")) base["seed"] = sc.seed;

    std::vector<std::string> keys;
    std::vector<std::vector<json>> values;
    for (const auto& [key, vals] : grid.items()) {
        keys.push_back(key);
        values.push_back(std::vector<json>(vals.begin(), vals.end()));
    }

    std::ostringstream index;
    index << "point";
    for (const auto& k : keys) index << ',' << k;
    index << ",step_time_seconds,bubble_ratio\n";

    std::vector<std::size_t> counter(keys.size(), 0);
    int point = 0;
    while (true) {
        json cfg = base;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            apply_override(cfg, keys[k], values[k][counter[k]]);
        }
        char name[32];
        std::snprintf(name, sizeof(name), "point_%03d", point);
        const fs::path point_dir = options.out_dir / name;
        const fs::path point_cfg = point_dir / "scenario.json";
        write_file_atomic(point_cfg, cfg.dump(2));
        files.push_back(point_cfg);

        RunOptions point_options = options;
        point_options.out_dir = point_dir;
        Scenario point_sc = load_scenario(point_cfg, RunOptions{});
        point_sc.config_dir = sc.config_dir;  // resolve workload/cluster like the base
        const json report = run_simulate_impl(point_sc, point_options, files);

        index << name;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            index << ',' << values[k][counter[k]].dump();
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), ",%.9e,%.9e",
                      report.at("step_time_seconds").get<double>(),
                      report.at("bubble_ratio").get<double>());
        index << buf << '\n';
        ++point;

        std::size_t k = 0;
        for (; k < keys.size(); ++k) {
            if (++counter[k] < values[k].size()) break;
            counter[k] = 0;
        }
        if (k == keys.size() || keys.empty()) break;
    }

    const fs::path idx = options.out_dir / "index.csv";
    write_file_atomic(idx, index.str());
    files.push_back(idx);
    (void)config_path;

    json report = report_header(sc);
    report["points"] = point;
    return report;
}

}  // namespace

bool is_known_subcommand(const std::string& subcommand) {
    return subcommand == "simulate" || subcommand == "balance" ||
           subcommand == "comms" || subcommand == "attn-report" ||
           subcommand == "reliability" || subcommand == "sweep";
}

std::vector<std::filesystem::path> run_subcommand(
    const std::string& subcommand, const std::filesystem::path& config_path,
    const RunOptions& options) {
    if (!is_known_subcommand(subcommand)) {
        throw ValidationError("UnknownSubcommand",
                              "no such subcommand: '" + subcommand + "'");
    }
    if (options.format != "json" && options.format != "csv" &&
        options.format != "both") {
        throw ValidationError("InvalidConfig", "format must be json, csv or both");
    }
    const Scenario sc = load_scenario(config_path, options);
    std::vector<fs::path> files;
    if (subcommand == "simulate") {
        run_simulate_impl(sc, options, files);
    } else if (subcommand == "balance") {
        run_balance_impl(sc, options, files);
    } else if (subcommand == "comms") {
        run_comms_impl(sc, options, files);
    } else if (subcommand == "attn-report") {
        run_attn_report_impl(sc, options, files);
    } else if (subcommand == "reliability") {
        run_reliability_impl(sc, options, files);
    } else {
        run_sweep_impl(sc, config_path, options, files);
    }
    return files;
}

}  // namespace omnisched
