#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chainsim/archive.hpp"
#include "chainsim/consensus.hpp"

namespace chainsim {

enum class Procedure : uint8_t {
    none = 0,
    final_block = 1,
    hard_fork_to_stable = 2,
    abandon_and_archive = 3,
};

const char* to_string(Procedure p);
std::optional<Procedure> procedure_from_string(const std::string& s);

struct ShutdownPlan {
    Procedure procedure = Procedure::none;
    std::optional<uint64_t> trigger_round;  // T
    uint64_t grace_rounds = 10;             // g
    Rational adoption_threshold{2, 3};      // hard fork only
    uint64_t adoption_window = 20;          // hard fork only
    std::optional<uint64_t> freeze_depth;   // local irreversibility rule
    double cost_budget = 0.0;               // "cheap" budget after T+g

    // Verdict reference point: T+g, or the horizon when no T is set.
    uint64_t reference_round(uint64_t horizon) const {
        if (!trigger_round) return horizon;
        return std::min(horizon, *trigger_round + grace_rounds);
    }
};

// "Stable and cheap": no record of the reference chain changes under a
// fresh protocol-faithful verifier at the horizon, and honest engagement
// after T+g stays within the budget.
struct GoodEndingVerdict {
    bool stable = false;
    bool cheap = false;
    uint64_t reference_round = 0;
    uint32_t records_checked = 0;
    uint32_t records_mismatched = 0;
    uint32_t records_unresolved = 0;
    std::vector<std::string> mismatch_examples;  // first few record ids
    double honest_cost_after = 0;
    double cost_budget = 0;
};

// reference_chain: the honest-consensus chain at the reference round.
// live: what active nodes serve at the horizon.
// honest_cost_per_round: indexed by round, 0..horizon-1.
GoodEndingVerdict evaluate_good_ending(const std::vector<Block>& reference_chain,
                                       const std::vector<ServedChain>& live,
                                       const ShutdownPlan& plan, uint64_t horizon,
                                       const std::vector<double>& honest_cost_per_round);

}  // namespace chainsim
