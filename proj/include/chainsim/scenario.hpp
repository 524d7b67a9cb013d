#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "chainsim/bytes.hpp"
#include "chainsim/community.hpp"
#include "chainsim/consensus.hpp"
#include "chainsim/shutdown.hpp"

namespace chainsim {

struct AnalyzerConfig {
    double safety_factor = 2.0;
    uint64_t sample_every = 1;
};

struct OutputPaths {
    std::string metrics;  // CSV; empty = don't write
    std::string events;   // binary event log
    std::string report;   // JSON
};

struct Scenario {
    std::string name;
    uint64_t horizon = 0;
    ConsensusRule consensus;
    Universe universe;  // sorted by id
    ChurnSchedule churn;
    ShutdownPlan shutdown;
    double fees_per_round = 0;
    AnalyzerConfig analyzers;
    bool bulletin_reachable = true;
    OutputPaths outputs;

    // Binary form embedded in the event-log header so a log is
    // self-contained for replay.
    void encode(ByteWriter& w) const;
    static Scenario decode(ByteReader& r);
};

// Parse or validation failure; `path` names the offending field.
struct ScenarioError : std::runtime_error {
    std::string path;
    ScenarioError(std::string p, const std::string& why)
        : std::runtime_error(p + ": " + why), path(std::move(p)) {}
};

Scenario load_scenario(const std::string& file_path);
Scenario parse_scenario(const std::string& json_text);

}  // namespace chainsim
