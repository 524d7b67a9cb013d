#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chainsim/archive.hpp"
#include "chainsim/community.hpp"
#include "chainsim/events.hpp"
#include "chainsim/metrics.hpp"
#include "chainsim/scenario.hpp"
#include "chainsim/shutdown.hpp"
#include "chainsim/strategies.hpp"

namespace chainsim {

// Per-round analyzer sample; the membership columns land in the metrics CSV,
// production thinness in the report.
struct RoundAnalyzers {
    uint64_t round = 0;
    Mode mode = Mode::dishonest;
    double honest_weight = 0;
    double dishonest_weight = 0;
    ThicknessReport membership;
    bool production_thin = true;  // willing-producer set, not membership
    double willing_weight = 0;
    uint32_t willing_count = 0;
};

struct HardForkOutcome {
    enum class State : uint8_t { not_applicable = 0, pending = 1, activated = 2, failed = 3 };
    State state = State::not_applicable;
    uint64_t fork_point = 0;
    uint64_t activation_round = 0;
    Digest fork_point_digest;
};

struct SimResult {
    EventLog log;
    Digest event_log_digest;
    std::vector<MetricsRow> metrics;
    std::vector<RoundAnalyzers> analyzer_trace;
    GoodEndingVerdict verdict;
    std::map<std::string, ChainView> final_views;  // the chain each node follows
    std::map<std::string, uint8_t> node_chain;
    std::set<std::string> active_at_horizon;
    std::vector<Snapshot> archives;
    Bulletin bulletin;
    HardForkOutcome hard_fork;
    std::vector<double> honest_cost_per_round;
    uint64_t blocks_produced_total = 0;
    std::vector<Block> reference_chain;
};

// One simulation run. `step()` advances a single round; `run()` below drives
// it to the horizon.
class SimEngine {
public:
    SimEngine(const Scenario& scenario, uint64_t seed);
    ~SimEngine();
    SimEngine(const SimEngine&) = delete;
    SimEngine& operator=(const SimEngine&) = delete;

    void step();
    bool done() const;
    uint64_t round() const;
    SimResult finish();

    // Test hooks.
    const ChainView& view_of(const std::string& node_id) const;
    bool is_active(const std::string& node_id) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SimResult run(const Scenario& scenario, uint64_t seed);

}  // namespace chainsim
