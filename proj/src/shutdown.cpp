#include "chainsim/shutdown.hpp"

namespace chainsim {

const char* to_string(Procedure p) {
    switch (p) {
        case Procedure::none: return "none";
        case Procedure::final_block: return "final_block";
        case Procedure::hard_fork_to_stable: return "hard_fork_to_stable";
        case Procedure::abandon_and_archive: return "abandon_and_archive";
    }
    return "?";
}

std::optional<Procedure> procedure_from_string(const std::string& s) {
    for (auto p : {Procedure::none, Procedure::final_block, Procedure::hard_fork_to_stable,
                   Procedure::abandon_and_archive}) {
        if (s == to_string(p)) return p;
    }
    return std::nullopt;
}

GoodEndingVerdict evaluate_good_ending(const std::vector<Block>& reference_chain,
                                       const std::vector<ServedChain>& live,
                                       const ShutdownPlan& plan, uint64_t horizon,
                                       const std::vector<double>& honest_cost_per_round) {
    GoodEndingVerdict v;
    v.reference_round = plan.reference_round(horizon);
    v.cost_budget = plan.cost_budget;

    // Stability: every reference record must resolve to identical bytes for
    // a fresh naive verifier asking the live network.
    static const std::vector<Snapshot> no_archives;
    static const Bulletin no_bulletin;
    for (const Block& b : reference_chain) {
        for (const Record& rec : b.records) {
            ++v.records_checked;
            Resolution r = resolve_query(rec.record_id, live, no_archives, no_bulletin,
                                         ResolvePolicy::naive);
            bool match = r.resolved && r.bytes == rec.body;
            if (!r.resolved) ++v.records_unresolved;
            if (!match) {
                ++v.records_mismatched;
                if (v.mismatch_examples.size() < 8) v.mismatch_examples.push_back(rec.record_id);
            }
        }
    }
    v.stable = v.records_mismatched == 0;

    for (uint64_t r = 0; r < honest_cost_per_round.size(); ++r) {
        if (r > v.reference_round) v.honest_cost_after += honest_cost_per_round[r];
    }
    v.cheap = v.honest_cost_after <= plan.cost_budget;
    return v;
}

}  // namespace chainsim
