#include "chainsim/strategies.hpp"

#include <cmath>

namespace chainsim {

namespace {

Action honest_action(const NodeSpec& spec, const StrategyRuntime& state, const DecisionContext& ctx) {
    Action a;
    a.willing = true;
    a.parent = ctx.view->tip();

    if (ctx.signaling_phase && spec.params.adopt_hard_fork && !state.signaled) a.submit_signal = true;

    if (ctx.final_block_phase) {
        if (!ctx.final_block_on_tip) {
            a.make_final = true;  // place (or re-place after displacement)
        } else {
            // Keep burying until the marker is settled, then leave.
            bool settled;
            if (ctx.rule.kind == ConsensusKind::stable) {
                settled = ctx.view->finalized_height() >= ctx.final_block_height;
            } else {
                settled = confirmation_status(*ctx.view, *ctx.final_block_on_tip,
                                              ctx.rule.confirmation_depth) == Confirmation::confirmed;
            }
            if (settled) {
                a.depart = true;
                a.willing = false;
            }
        }
    }
    return a;
}

Action rewrite_action(const StrategyRuntime& state, const DecisionContext& ctx) {
    Action a;
    a.willing = true;
    a.censor_signals = true;
    if (state.attack_started && state.fork_tip) {
        a.parent = *state.fork_tip;
        a.withhold = true;
    } else {
        a.parent = ctx.view->tip();  // blend in until the attack starts
    }
    return a;
}

}  // namespace

Action decide_action(const NodeSpec& spec, const StrategyRuntime& state, const DecisionContext& ctx) {
    switch (state.defected ? StrategyKind::rewrite_attacker : spec.strategy) {
        case StrategyKind::honest_default:
            return honest_action(spec, state, ctx);

        case StrategyKind::fee_waiter: {
            Action a = honest_action(spec, state, ctx);
            if (ctx.mempool->fee_mass < spec.params.fee_threshold) a.willing = false;
            return a;
        }

        case StrategyKind::defector: {
            if (!state.defected && ctx.active_weight > 0 &&
                ctx.own_weight / ctx.active_weight >= spec.params.defect_threshold) {
                Action a;
                a.defect_now = true;
                a.willing = false;
                return a;
            }
            return honest_action(spec, state, ctx);
        }

        case StrategyKind::suppressor: {
            Action a;
            a.willing = true;
            a.parent = ctx.view->tip();
            a.censor_signals = true;
            int64_t r = static_cast<int64_t>(ctx.round);
            if (r >= spec.params.attack_start_round &&
                (spec.params.attack_end_round < 0 || r <= spec.params.attack_end_round)) {
                a.suppress = spec.params.victims;
            }
            return a;
        }

        case StrategyKind::rewrite_attacker:
        case StrategyKind::late_dominator:
            return rewrite_action(state, ctx);
    }
    return {};
}

double catchup_probability(double attacker_weight, double honest_weight, uint64_t deficit) {
    if (attacker_weight >= honest_weight) return 1.0;
    return std::pow(attacker_weight / honest_weight, static_cast<double>(deficit));
}

}  // namespace chainsim
