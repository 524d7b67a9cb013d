#include "chainsim/community.hpp"

#include <algorithm>
#include <cmath>

namespace chainsim {

const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::honest_default: return "honest_default";
        case StrategyKind::rewrite_attacker: return "rewrite_attacker";
        case StrategyKind::suppressor: return "suppressor";
        case StrategyKind::fee_waiter: return "fee_waiter";
        case StrategyKind::defector: return "defector";
        case StrategyKind::late_dominator: return "late_dominator";
    }
    return "?";
}

std::optional<StrategyKind> strategy_from_string(const std::string& s) {
    for (auto k : {StrategyKind::honest_default, StrategyKind::rewrite_attacker,
                   StrategyKind::suppressor, StrategyKind::fee_waiter, StrategyKind::defector,
                   StrategyKind::late_dominator}) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

const NodeSpec* Universe::find(const std::string& id) const {
    for (const NodeSpec& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

double Universe::max_weight() const {
    double m = 0;
    for (const NodeSpec& n : nodes) m = std::max(m, n.weight);
    return m;
}

const ChurnPhase* ChurnSchedule::phase_at(uint64_t round) const {
    for (const ChurnPhase& p : phases)
        if (round >= p.start_round && round <= p.end_round) return &p;
    return nullptr;
}

CommunityTracker::CommunityTracker(const Universe& universe, ChurnSchedule schedule)
    : universe_(universe), schedule_(std::move(schedule)) {
    for (const NodeSpec& n : universe_.nodes) disposition_[n.id] = n.disposition;
    // Schedule-free nodes start active unless a join ramp governs entry.
    ramp_in_ = false;
    for (const ChurnPhase& p : schedule_.phases)
        if (p.join_rate > 0) ramp_in_ = true;
}

CommunitySnapshot CommunityTracker::build_snapshot(uint64_t round) const {
    CommunitySnapshot s;
    s.round = round;
    s.active = active_;
    s.disposition = disposition_;
    for (const std::string& id : active_) {
        const NodeSpec* n = universe_.find(id);
        if (disposition_.at(id) == Disposition::honest)
            s.honest_weight += n->weight;
        else
            s.dishonest_weight += n->weight;
    }
    return s;
}

CommunityTracker::StepResult CommunityTracker::step(uint64_t round, Rng& rng,
                                                    const MembershipOverrides& overrides) {
    StepResult out;
    auto join = [&](const std::string& id) {
        if (active_.insert(id).second) {
            ever_joined_.insert(id);
            out.joined.push_back(id);
        }
    };
    auto leave = [&](const std::string& id) {
        if (active_.erase(id) > 0) out.left.push_back(id);
    };

    // Explicit windows first: active iff join_round <= round < leave_round.
    for (const NodeSpec& n : universe_.nodes) {
        if (force_left_.count(n.id)) continue;
        bool window_in = n.join_round && *n.join_round == round;
        bool default_in = !n.join_round && round == 0 && (n.leave_round || !ramp_in_);
        if (window_in || default_in) join(n.id);
        if (n.leave_round && *n.leave_round == round) leave(n.id);
    }

    // Rate-driven churn over the schedule-free pool.
    if (const ChurnPhase* phase = schedule_.phase_at(round)) {
        join_acc_ += phase->join_rate;
        leave_acc_ += phase->leave_rate;
        uint64_t joins = static_cast<uint64_t>(std::floor(join_acc_));
        uint64_t leaves = static_cast<uint64_t>(std::floor(leave_acc_));
        join_acc_ -= static_cast<double>(joins);
        leave_acc_ -= static_cast<double>(leaves);

        for (uint64_t i = 0; i < joins; ++i) {
            std::vector<std::string> pool;
            for (const NodeSpec& n : universe_.nodes) {
                if (n.schedule_free() && !ever_joined_.count(n.id) && !force_left_.count(n.id))
                    pool.push_back(n.id);
            }
            if (pool.empty()) break;
            join(pool[rng.next_below(pool.size())]);
        }
        for (uint64_t i = 0; i < leaves; ++i) {
            std::vector<std::string> pool;
            for (const NodeSpec& n : universe_.nodes) {
                if (n.schedule_free() && active_.count(n.id)) pool.push_back(n.id);
            }
            if (pool.empty()) break;
            leave(pool[rng.next_below(pool.size())]);
        }
    }

    // Overrides win.
    for (const std::string& id : overrides.force_join)
        if (universe_.find(id)) join(id);
    for (const std::string& id : overrides.force_leave) {
        if (universe_.find(id)) {
            leave(id);
            force_left_.insert(id);
        }
    }

    snapshot_ = build_snapshot(round);
    out.snapshot = snapshot_;
    return out;
}

void CommunityTracker::flip_disposition(const std::string& id, Disposition d) {
    disposition_[id] = d;
    snapshot_ = build_snapshot(snapshot_.round);
}

CommunitySnapshot active_set(const Universe& universe, const ChurnSchedule& schedule,
                             uint64_t round, uint64_t seed,
                             const std::map<uint64_t, MembershipOverrides>& overrides) {
    CommunityTracker tracker(universe, schedule);
    Rng rng(seed, "churn");
    CommunitySnapshot last;
    for (uint64_t r = 0; r <= round; ++r) {
        auto it = overrides.find(r);
        last = tracker.step(r, rng, it == overrides.end() ? MembershipOverrides{} : it->second)
                   .snapshot;
    }
    return last;
}

LumpinessResult is_lumpy(const Universe& universe, const CommunitySnapshot& snapshot,
                         const ConsensusRule& rule) {
    Mode base = mode_predicate(rule, snapshot.honest_weight, snapshot.dishonest_weight).mode;
    for (const NodeSpec& n : universe.nodes) {
        auto it = snapshot.disposition.find(n.id);
        Disposition d = it == snapshot.disposition.end() ? n.disposition : it->second;
        double dh = d == Disposition::honest ? n.weight : 0;
        double dd = d == Disposition::dishonest ? n.weight : 0;
        double h, w;
        if (snapshot.is_active(n.id)) {
            h = snapshot.honest_weight - dh;
            w = snapshot.dishonest_weight - dd;
        } else {
            h = snapshot.honest_weight + dh;
            w = snapshot.dishonest_weight + dd;
        }
        if (mode_predicate(rule, h, w).mode != base) return {true, n.id};
    }
    return {false, std::nullopt};
}

ThicknessReport thickness(const Universe& universe, const CommunitySnapshot& snapshot,
                          const ConsensusRule& rule, double safety_factor) {
    ThicknessReport rep;
    LumpinessResult lr = is_lumpy(universe, snapshot, rule);
    rep.lumpy = lr.lumpy;
    rep.witness = lr.witness;
    rep.margin_to_flip =
        mode_predicate(rule, snapshot.honest_weight, snapshot.dishonest_weight).margin_to_flip;
    rep.max_universe_weight = universe.max_weight();
    rep.risk_threshold = safety_factor * rep.max_universe_weight;
    rep.verdict = (rep.lumpy || rep.margin_to_flip <= rep.risk_threshold) ? Thickness::thin
                                                                          : Thickness::thick;
    return rep;
}

}  // namespace chainsim
