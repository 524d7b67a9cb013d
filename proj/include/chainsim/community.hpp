#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chainsim/consensus.hpp"
#include "chainsim/rng.hpp"

namespace chainsim {

enum class Disposition : uint8_t {
    honest = 0,
    dishonest = 1,
};

inline const char* to_string(Disposition d) { return d == Disposition::honest ? "honest" : "dishonest"; }

enum class StrategyKind : uint8_t {
    honest_default = 0,
    rewrite_attacker = 1,
    suppressor = 2,
    fee_waiter = 3,
    defector = 4,
    late_dominator = 5,
};

const char* to_string(StrategyKind k);
std::optional<StrategyKind> strategy_from_string(const std::string& s);

// Per-strategy knobs; which ones are meaningful (and which are required)
// is enforced by scenario validation.
struct StrategyParams {
    double fee_threshold = -1;        // fee_waiter, required
    double defect_threshold = 0.33;   // defector
    int64_t attack_start_round = 0;   // rewrite_attacker, late_dominator, suppressor
    int64_t attack_end_round = -1;    // suppressor; -1 = until the node leaves
    int64_t target_height = -1;       // rewrite fork point; -1 = tip at attack start
    std::vector<std::string> victims; // suppressor, required
    bool adopt_hard_fork = true;      // honest_default
};

struct NodeSpec {
    std::string id;
    double weight = 1.0;
    Disposition disposition = Disposition::honest;
    StrategyKind strategy = StrategyKind::honest_default;
    std::optional<uint64_t> join_round;
    std::optional<uint64_t> leave_round;
    StrategyParams params;

    // Schedule-free members are the pool the churn rates draw from.
    bool schedule_free() const { return !join_round && !leave_round; }
};

struct Universe {
    std::vector<NodeSpec> nodes;  // sorted by id

    const NodeSpec* find(const std::string& id) const;
    double max_weight() const;
};

struct CommunitySnapshot {
    uint64_t round = 0;
    std::set<std::string> active;
    double honest_weight = 0;
    double dishonest_weight = 0;
    // Current disposition of every universe node (defectors flip here).
    std::map<std::string, Disposition> disposition;

    bool is_active(const std::string& id) const { return active.count(id) > 0; }
};

struct ChurnPhase {
    uint64_t start_round = 0;
    uint64_t end_round = 0;  // inclusive
    double join_rate = 0;    // expected joins per round
    double leave_rate = 0;   // expected leaves per round
};

struct ChurnSchedule {
    std::vector<ChurnPhase> phases;

    const ChurnPhase* phase_at(uint64_t round) const;
};

// Strategy- or shutdown-driven membership changes; these win over the
// schedule.
struct MembershipOverrides {
    std::vector<std::string> force_join;
    std::vector<std::string> force_leave;
};

// Advances membership round by round. Rate-driven counts use an
// error-diffusion accumulator, so integer rates are exact; which nodes move
// is drawn from the "churn" rng stream.
class CommunityTracker {
public:
    CommunityTracker(const Universe& universe, ChurnSchedule schedule);

    struct StepResult {
        CommunitySnapshot snapshot;
        std::vector<std::string> joined;
        std::vector<std::string> left;
    };

    StepResult step(uint64_t round, Rng& rng, const MembershipOverrides& overrides = {});

    void flip_disposition(const std::string& id, Disposition d);
    const CommunitySnapshot& current() const { return snapshot_; }

private:
    CommunitySnapshot build_snapshot(uint64_t round) const;

    const Universe& universe_;
    ChurnSchedule schedule_;
    std::set<std::string> active_;
    std::set<std::string> ever_joined_;
    std::set<std::string> force_left_;
    std::map<std::string, Disposition> disposition_;
    bool ramp_in_ = false;
    double join_acc_ = 0;
    double leave_acc_ = 0;
    CommunitySnapshot snapshot_;
};

// Convenience wrapper matching the functional shape: replays the tracker
// from round 0 to `round` with the given seed.
CommunitySnapshot active_set(const Universe& universe, const ChurnSchedule& schedule,
                             uint64_t round, uint64_t seed,
                             const std::map<uint64_t, MembershipOverrides>& overrides = {});

struct LumpinessResult {
    bool lumpy = false;
    std::optional<std::string> witness;  // smallest flipping node id
};

// True iff toggling a single universe node's membership flips the mode.
LumpinessResult is_lumpy(const Universe& universe, const CommunitySnapshot& snapshot,
                         const ConsensusRule& rule);

enum class Thickness : uint8_t {
    thick = 0,
    thin = 1,
};

struct ThicknessReport {
    Thickness verdict = Thickness::thick;
    bool lumpy = false;
    std::optional<std::string> witness;
    double margin_to_flip = 0;
    double max_universe_weight = 0;
    double risk_threshold = 0;  // safety_factor * max universe weight
};

// thin iff lumpy or margin_to_flip <= safety_factor * max universe weight.
ThicknessReport thickness(const Universe& universe, const CommunitySnapshot& snapshot,
                          const ConsensusRule& rule, double safety_factor);

}  // namespace chainsim
