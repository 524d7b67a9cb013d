#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chainsim/batch.hpp"
#include "chainsim/replay.hpp"
#include "chainsim/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::vector<uint64_t> parse_seeds(const std::string& spec) {
    // Either a count ("100" -> seeds 0..99) or an explicit comma list
    // ("3,17,42").
    std::vector<uint64_t> seeds;
    if (spec.find(',') == std::string::npos) {
        uint64_t n = std::stoull(spec);
        for (uint64_t i = 0; i < n; ++i) seeds.push_back(i);
        return seeds;
    }
    std::string item;
    std::istringstream in(spec);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    return seeds;
}

int cmd_simulate(const std::string& scenario_path, const std::string& seeds_spec,
                 const std::string& out_dir) {
    chainsim::Scenario scenario = chainsim::load_scenario(scenario_path);
    std::vector<uint64_t> seeds = parse_seeds(seeds_spec);
    chainsim::BatchSummary summary = chainsim::run_batch(scenario, seeds, out_dir);
    if (!out_dir.empty()) {
        std::ofstream f(std::filesystem::path(out_dir) / "summary.json");
        f << summary.to_json() << "\n";
    }
    std::cout << summary.to_json() << std::endl;
    return kExitOk;
}

int cmd_analyze(const std::string& events_path, const std::string& metrics_out) {
    chainsim::ReplayResult r = chainsim::analyze_file(events_path);
    if (!metrics_out.empty()) chainsim::save_metrics(r.metrics, metrics_out);
    nlohmann::json j;
    j["scenario"] = r.scenario.name;
    j["seed"] = r.seed;
    j["event_log_digest"] = r.event_log_digest.hex();
    j["blocks_produced"] = r.blocks_produced_total;
    j["metrics_rows"] = r.metrics.size();
    j["verdict"] = {{"stable", r.verdict.stable},
                    {"cheap", r.verdict.cheap},
                    {"reference_round", r.verdict.reference_round},
                    {"records_checked", r.verdict.records_checked},
                    {"records_mismatched", r.verdict.records_mismatched},
                    {"records_unresolved", r.verdict.records_unresolved},
                    {"honest_cost_after", r.verdict.honest_cost_after}};
    std::cout << j.dump(2) << std::endl;
    return kExitOk;
}

int cmd_archive_verify(const std::string& snapshot_path, const std::string& bulletin_path) {
    chainsim::Snapshot snap = chainsim::Snapshot::load(snapshot_path);
    chainsim::Bulletin bulletin = chainsim::Bulletin::load(bulletin_path);
    chainsim::SnapshotVerdict v = chainsim::verify_snapshot(snap, bulletin);
    auto consistency = chainsim::internal_consistency_check(snap);
    nlohmann::json j;
    j["snapshot"] = snapshot_path;
    j["archivist"] = snap.archivist;
    j["height"] = snap.height;
    j["digest"] = snap.digest.hex();
    j["verdict"] = chainsim::to_string(v);
    j["internally_consistent"] = consistency.ok;
    if (!consistency.ok) {
        j["first_failing_height"] = consistency.first_failing_height;
        j["reason"] = consistency.reason;
    }
    std::cout << j.dump(2) << std::endl;
    return kExitOk;
}

int cmd_archive_compare(const std::vector<std::string>& snapshot_paths,
                        const std::string& bulletin_path) {
    std::vector<chainsim::Snapshot> snaps;
    for (const std::string& p : snapshot_paths) snaps.push_back(chainsim::Snapshot::load(p));
    chainsim::Bulletin bulletin;
    bool have_bulletin = !bulletin_path.empty();
    if (have_bulletin) bulletin = chainsim::Bulletin::load(bulletin_path);
    chainsim::ArchiveComparison c =
        chainsim::compare_archives(snaps, have_bulletin ? &bulletin : nullptr);
    nlohmann::json j;
    j["snapshots"] = snapshot_paths;
    j["bulletin"] = have_bulletin ? bulletin_path : "(withheld)";
    j["classification"] = chainsim::to_string(c);
    std::cout << j.dump(2) << std::endl;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chainsim: deterministic blockchain life-cycle simulator"};
    app.require_subcommand(1);

    std::string scenario_path, seeds_spec = "1", out_dir;
    auto* sim = app.add_subcommand("simulate", "run a scenario over one or more seeds");
    sim->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    sim->add_option("--seeds", seeds_spec, "seed count n (runs 0..n-1) or comma list");
    sim->add_option("--out", out_dir, "output directory for metrics/events/reports");

    std::string events_path, metrics_out;
    auto* ana = app.add_subcommand("analyze", "recompute verdict and metrics from an event log");
    ana->add_option("--events", events_path, "binary event log")->required();
    ana->add_option("--metrics", metrics_out, "write recomputed metrics CSV here");

    auto* arc = app.add_subcommand("archive", "archive file tooling");
    arc->require_subcommand(1);
    std::string snapshot_path, bulletin_path;
    auto* ver = arc->add_subcommand("verify", "verify a snapshot against the bulletin");
    ver->add_option("--snapshot", snapshot_path, "snapshot file")->required();
    ver->add_option("--bulletin", bulletin_path, "bulletin JSON file")->required();

    std::vector<std::string> snapshot_paths;
    std::string cmp_bulletin;
    auto* cmp = arc->add_subcommand("compare", "classify divergence across snapshots");
    cmp->add_option("--snapshots", snapshot_paths, "snapshot files")->required()->expected(-2);
    cmp->add_option("--bulletin", cmp_bulletin, "bulletin JSON file (omit to withhold)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(scenario_path, seeds_spec, out_dir);
        if (ana->parsed()) return cmd_analyze(events_path, metrics_out);
        if (arc->parsed()) {
            if (ver->parsed()) return cmd_archive_verify(snapshot_path, bulletin_path);
            if (cmp->parsed()) return cmd_archive_compare(snapshot_paths, cmp_bulletin);
        }
    } catch (const chainsim::ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << std::endl;
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitRuntime;
    }
    return kExitUsage;
}
