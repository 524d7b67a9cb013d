#pragma once

#include <cstdint>
#include <vector>

#include "chainsim/events.hpp"
#include "chainsim/metrics.hpp"
#include "chainsim/shutdown.hpp"

namespace chainsim {

struct ReplayResult {
    Scenario scenario;
    uint64_t seed = 0;
    std::vector<MetricsRow> metrics;
    GoodEndingVerdict verdict;
    Digest event_log_digest;
    uint64_t blocks_produced_total = 0;
};

// Reconstructs the run from its event log: communities, tips and costs are
// replayed event by event, analyzers recomputed, and the good-ending verdict
// re-evaluated. Output must match the original run exactly.
ReplayResult analyze_log(const EventLog& log);
ReplayResult analyze_file(const std::string& path);

}  // namespace chainsim
