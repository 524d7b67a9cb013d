#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chainsim/chain.hpp"
#include "chainsim/community.hpp"
#include "chainsim/consensus.hpp"

namespace chainsim {

// Pending fee mass plus records waiting for inclusion (adoption signals).
struct Mempool {
    double fee_mass = 0;
    std::vector<Record> pending;
};

// Per-node mutable strategy state, owned by the engine.
struct StrategyRuntime {
    bool attack_started = false;
    bool defected = false;
    bool signaled = false;

    // Rewrite fork bookkeeping. The fork lives inside the node's own view;
    // `unpublished` are the blocks not yet broadcast.
    std::optional<Digest> fork_tip;
    uint64_t fork_height = 0;
    std::vector<Block> unpublished;

    // Highest public-chain block this node has seen (received, or published
    // by itself).
    Digest best_public_tip;
    uint64_t best_public_height = 0;
};

// What a node reads when deciding; previous-round state only.
struct DecisionContext {
    uint64_t round = 0;
    const ChainView* view = nullptr;
    const Mempool* mempool = nullptr;
    ConsensusRule rule;
    double own_weight = 0;
    double active_weight = 0;

    // Shutdown directives in force this round.
    bool final_block_phase = false;     // honest producers should place/keep the final marker
    bool signaling_phase = false;       // hard-fork adoption window open
    std::optional<Digest> final_block_on_tip;  // final marker found on own tip path
    uint64_t final_block_height = 0;
    std::string latest_commitment_hex;  // payload for the final marker record
};

// One round's intent; the engine executes it.
struct Action {
    bool willing = false;             // enter the producer lottery
    Digest parent;                    // block to build on if elected
    bool withhold = false;            // keep the produced block private
    bool make_final = false;          // produced block carries marker=final
    bool censor_signals = false;      // skip adoption_signal records when producing
    bool submit_signal = false;       // put own adoption_signal into the mempool
    std::vector<std::string> suppress;  // victims whose messages get dropped
    bool depart = false;              // leave the community next round
    bool defect_now = false;          // flip to dishonest + start rewriting
};

// Pure given (spec, state, ctx); called once per active node per round.
Action decide_action(const NodeSpec& spec, const StrategyRuntime& state, const DecisionContext& ctx);

// Closed-form gambler's-ruin catch-up probability: chance that a private
// fork, producing with weight `a` against public weight `h` in a
// weight-proportional per-round lottery, ever closes an initial deficit of
// `z` blocks. Used as the independent oracle for the race tests.
double catchup_probability(double attacker_weight, double honest_weight, uint64_t deficit);

}  // namespace chainsim
