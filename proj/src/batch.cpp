#include "chainsim/batch.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace chainsim {

using nlohmann::json;

namespace {

json verdict_json(const GoodEndingVerdict& v) {
    return json{{"stable", v.stable},
                {"cheap", v.cheap},
                {"reference_round", v.reference_round},
                {"records_checked", v.records_checked},
                {"records_mismatched", v.records_mismatched},
                {"records_unresolved", v.records_unresolved},
                {"mismatch_examples", v.mismatch_examples},
                {"honest_cost_after", v.honest_cost_after},
                {"cost_budget", v.cost_budget}};
}

const char* fork_state_name(HardForkOutcome::State s) {
    switch (s) {
        case HardForkOutcome::State::not_applicable: return "not_applicable";
        case HardForkOutcome::State::pending: return "pending";
        case HardForkOutcome::State::activated: return "activated";
        case HardForkOutcome::State::failed: return "failed";
    }
    return "?";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

}  // namespace

std::string report_json(const Scenario& scenario, uint64_t seed, const SimResult& result) {
    json j;
    j["scenario"] = scenario.name;
    j["seed"] = seed;
    j["horizon"] = scenario.horizon;
    j["event_log_digest"] = result.event_log_digest.hex();
    j["verdict"] = verdict_json(result.verdict);
    j["blocks_produced"] = result.blocks_produced_total;
    j["hard_fork"] = {{"state", fork_state_name(result.hard_fork.state)},
                      {"fork_point", result.hard_fork.fork_point},
                      {"activation_round", result.hard_fork.activation_round}};

    json tips = json::object();
    for (const auto& [id, view] : result.final_views) {
        tips[id] = {{"tip", view.tip().hex()},
                    {"height", view.tip_height()},
                    {"finalized_height", view.finalized_height()},
                    {"frozen_height", view.frozen_height()},
                    {"chain", result.node_chain.at(id)},
                    {"active", result.active_at_horizon.count(id) > 0}};
    }
    j["final_views"] = tips;

    int64_t first_lumpy = -1;
    for (const MetricsRow& row : result.metrics) {
        if (row.lumpy) {
            first_lumpy = static_cast<int64_t>(row.round);
            break;
        }
    }
    uint64_t production_thin_rounds = 0;
    uint64_t thin_membership_rounds = 0;
    for (const RoundAnalyzers& ra : result.analyzer_trace) {
        if (ra.production_thin) ++production_thin_rounds;
        if (ra.membership.verdict == Thickness::thin) ++thin_membership_rounds;
    }
    j["analyzers"] = {{"first_lumpy_round", first_lumpy},
                      {"thin_membership_rounds", thin_membership_rounds},
                      {"production_thin_rounds", production_thin_rounds},
                      {"samples", result.analyzer_trace.size()}};

    json arch = json::array();
    for (const Snapshot& s : result.archives) {
        arch.push_back({{"archivist", s.archivist},
                        {"round", s.taken_round},
                        {"height", s.height},
                        {"digest", s.digest.hex()}});
    }
    j["archives"] = arch;
    j["bulletin_entries"] = result.bulletin.entries.size();

    uint64_t violations = 0;
    for (const SimEvent& e : result.log.events())
        if (e.kind() == EventKind::safety_violation) ++violations;
    j["safety_violations"] = violations;
    return j.dump(2);
}

void write_run_outputs(const Scenario& scenario, uint64_t seed, const SimResult& result,
                       const std::string& out_dir, bool single_seed) {
    namespace fs = std::filesystem;
    auto pick = [&](const std::string& explicit_path, const std::string& stem,
                    const std::string& ext) -> std::string {
        if (single_seed && !explicit_path.empty()) return explicit_path;
        return (fs::path(out_dir) / (stem + "-" + std::to_string(seed) + ext)).string();
    };
    if (!out_dir.empty()) fs::create_directories(out_dir);

    save_metrics(result.metrics, pick(scenario.outputs.metrics, "metrics", ".csv"));
    std::string events_path = pick(scenario.outputs.events, "events", ".bin");
    result.log.save(events_path);
    write_text(events_path + ".jsonl", result.log.to_json_lines());
    write_text(pick(scenario.outputs.report, "report", ".json"),
               report_json(scenario, seed, result));

    for (const Snapshot& s : result.archives) {
        fs::path p = fs::path(out_dir.empty() ? "." : out_dir) /
                     ("snapshot-" + std::to_string(seed) + "-" + s.archivist + ".bin");
        s.save(p.string());
    }
    if (!result.bulletin.entries.empty()) {
        fs::path p =
            fs::path(out_dir.empty() ? "." : out_dir) / ("bulletin-" + std::to_string(seed) + ".json");
        result.bulletin.save(p.string());
    }
}

BatchSummary run_batch(const Scenario& scenario, const std::vector<uint64_t>& seeds,
                       const std::string& out_dir) {
    BatchSummary sum;
    sum.scenario_name = scenario.name;
    for (uint64_t seed : seeds) {
        SimResult result = run(scenario, seed);
        ++sum.runs;
        if (result.verdict.stable) ++sum.stable_count;
        if (result.verdict.cheap) ++sum.cheap_count;
        if (result.verdict.stable && result.verdict.cheap) ++sum.good_endings;
        if (!result.verdict.stable) ++sum.rewrite_successes;
        if (result.hard_fork.state == HardForkOutcome::State::activated) ++sum.fork_activations;
        if (result.hard_fork.state == HardForkOutcome::State::failed) ++sum.fork_failures;
        bool split = false;
        for (const SimEvent& e : result.log.events()) {
            if (auto* sv = std::get_if<EvSafetyViolation>(&e.payload)) {
                if (sv->code == ViolationCode::permanent_split) split = true;
            }
        }
        if (split) ++sum.permanent_splits;
        int64_t first_lumpy = -1;
        for (const MetricsRow& row : result.metrics) {
            if (row.lumpy) {
                first_lumpy = static_cast<int64_t>(row.round);
                break;
            }
        }
        sum.first_lumpy_round.push_back(first_lumpy);
        if (!out_dir.empty())
            write_run_outputs(scenario, seed, result, out_dir, seeds.size() == 1);
    }
    return sum;
}

std::string BatchSummary::to_json() const {
    json j;
    j["scenario"] = scenario_name;
    j["runs"] = runs;
    j["stable"] = stable_count;
    j["cheap"] = cheap_count;
    j["good_endings"] = good_endings;
    j["good_ending_rate"] = good_ending_rate();
    j["rewrite_successes"] = rewrite_successes;
    j["rewrite_success_rate"] = rewrite_success_rate();
    j["fork_activations"] = fork_activations;
    j["fork_failures"] = fork_failures;
    j["permanent_splits"] = permanent_splits;
    j["first_lumpy_round"] = first_lumpy_round;
    return j.dump(2);
}

}  // namespace chainsim
