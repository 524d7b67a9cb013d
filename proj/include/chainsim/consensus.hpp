#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chainsim/chain.hpp"
#include "chainsim/rng.hpp"

namespace chainsim {

// Exact fraction for quorum/adoption thresholds. Boundary cases in the mode
// predicate are decided on integer cross-products, so "2/3" must not go
// through a double.
struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;

    static std::optional<Rational> parse(const std::string& text);
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

enum class ConsensusKind : uint8_t {
    unstable = 0,  // longest chain; any block may be revised
    stable = 1,    // quorum finality; finalized blocks are never revised
};

struct ConsensusRule {
    ConsensusKind kind = ConsensusKind::unstable;
    uint64_t confirmation_depth = 6;        // unstable only
    Rational quorum_fraction{2, 3};         // stable only

    static ConsensusRule make_unstable(uint64_t k = 6) {
        ConsensusRule r;
        r.kind = ConsensusKind::unstable;
        r.confirmation_depth = k;
        return r;
    }
    static ConsensusRule make_stable(Rational q = {2, 3}) {
        ConsensusRule r;
        r.kind = ConsensusKind::stable;
        r.quorum_fraction = q;
        return r;
    }
};

enum class Mode : uint8_t {
    honest = 0,
    dishonest = 1,
};

inline const char* to_string(Mode m) { return m == Mode::honest ? "honest" : "dishonest"; }

struct ModeState {
    Mode mode = Mode::dishonest;
    // Minimum total weight whose addition or removal flips the mode
    // (infimum when the boundary is open). 0 iff the community sits exactly
    // at the threshold.
    double margin_to_flip = 0.0;
};

// Unstable: honest iff honest_weight > dishonest_weight (tie is dishonest).
// Stable:   honest iff dishonest_weight < (1 - q) * total.
ModeState mode_predicate(const ConsensusRule& rule, double honest_weight, double dishonest_weight);

// Weight-proportional leader lottery. Empty list → nullopt and no rng draw;
// otherwise exactly one draw. Candidates are scanned in the order given, so
// callers pass them sorted by node id.
std::optional<std::string> elect_producer(
    const std::vector<std::pair<std::string, double>>& willing, Rng& rng);

enum class FinalizeOutcome : uint8_t {
    pending = 0,
    finalized = 1,
    conflicting_finalization = 2,  // safety violation: second block at a finalized height
};

struct Approval {
    std::string node;
    double weight = 0;
};

// Per-chain finality bookkeeping for the stable rule.
class FinalityTracker {
public:
    // finalized iff approving weight >= q * active_weight.
    FinalizeOutcome finalize_step(const ConsensusRule& rule, const Block& proposal,
                                  const std::vector<Approval>& approvals, double active_weight);

    uint64_t finalized_height() const { return finalized_height_; }
    std::optional<Digest> finalized_at(uint64_t height) const;

private:
    std::map<uint64_t, Digest> finalized_;
    uint64_t finalized_height_ = 0;
};

enum class Confirmation : uint8_t {
    unconfirmed = 0,
    confirmed = 1,
};

// Depth-k confirmation: confirmed iff the block sits on the tip path at
// depth >= k.
Confirmation confirmation_status(const ChainView& view, const Digest& block_id, uint64_t k);

// Height below which the view is settled for archiving: tip - k under the
// unstable rule (0 if the chain is shorter than k), finalized height under
// the stable rule.
uint64_t settled_height(const ChainView& view, const ConsensusRule& rule);

}  // namespace chainsim
