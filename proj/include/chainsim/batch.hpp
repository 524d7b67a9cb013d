#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chainsim/engine.hpp"

namespace chainsim {

struct BatchSummary {
    std::string scenario_name;
    uint64_t runs = 0;
    uint64_t stable_count = 0;
    uint64_t cheap_count = 0;
    uint64_t good_endings = 0;       // stable && cheap
    uint64_t rewrite_successes = 0;  // !stable
    uint64_t fork_activations = 0;
    uint64_t fork_failures = 0;
    uint64_t permanent_splits = 0;
    std::vector<int64_t> first_lumpy_round;  // per seed; -1 = never

    double good_ending_rate() const { return runs ? double(good_endings) / double(runs) : 0; }
    double rewrite_success_rate() const { return runs ? double(rewrite_successes) / double(runs) : 0; }

    std::string to_json() const;
};

std::string report_json(const Scenario& scenario, uint64_t seed, const SimResult& result);

// Per-seed artifacts under out_dir (metrics CSV, binary event log + JSON-lines
// rendering, report, snapshots, bulletin). Explicit scenario output paths win
// for single-seed runs.
void write_run_outputs(const Scenario& scenario, uint64_t seed, const SimResult& result,
                       const std::string& out_dir, bool single_seed);

// Runs every seed, writes artifacts when out_dir is non-empty, returns the
// aggregate. Aggregation is order-independent.
BatchSummary run_batch(const Scenario& scenario, const std::vector<uint64_t>& seeds,
                       const std::string& out_dir = "");

}  // namespace chainsim
