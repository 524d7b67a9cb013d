#include "chainsim/consensus.hpp"

#include <cmath>
#include <cstdlib>

namespace chainsim {

std::optional<Rational> Rational::parse(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 >= text.size()) return std::nullopt;
    char* end = nullptr;
    long long n = std::strtoll(text.c_str(), &end, 10);
    if (end != text.c_str() + slash) return std::nullopt;
    long long d = std::strtoll(text.c_str() + slash + 1, &end, 10);
    if (*end != '\0' || d <= 0) return std::nullopt;
    return Rational{n, d};
}

ModeState mode_predicate(const ConsensusRule& rule, double honest_weight, double dishonest_weight) {
    ModeState out;
    if (rule.kind == ConsensusKind::unstable) {
        out.mode = honest_weight > dishonest_weight ? Mode::honest : Mode::dishonest;
        out.margin_to_flip = std::abs(honest_weight - dishonest_weight);
        return out;
    }
    // Stable: honest iff d < (1 - q) * (h + d), evaluated as
    // d * den < (den - num) * (h + d) to keep q exact.
    double total = honest_weight + dishonest_weight;
    double lhs = dishonest_weight * static_cast<double>(rule.quorum_fraction.den);
    double rhs = static_cast<double>(rule.quorum_fraction.den - rule.quorum_fraction.num) * total;
    out.mode = lhs < rhs ? Mode::honest : Mode::dishonest;
    // Cheapest flip is adding dishonest weight (honest mode) or removing it
    // (dishonest mode): |d - (1-q)t| / q.
    out.margin_to_flip = std::abs(lhs - rhs) / static_cast<double>(rule.quorum_fraction.num);
    return out;
}

std::optional<std::string> elect_producer(
    const std::vector<std::pair<std::string, double>>& willing, Rng& rng) {
    if (willing.empty()) return std::nullopt;
    double total = 0;
    for (const auto& [id, w] : willing) total += w;
    double u = rng.next_unit() * total;
    double cum = 0;
    for (const auto& [id, w] : willing) {
        cum += w;
        if (u < cum) return id;
    }
    return willing.back().first;
}

FinalizeOutcome FinalityTracker::finalize_step(const ConsensusRule& rule, const Block& proposal,
                                               const std::vector<Approval>& approvals,
                                               double active_weight) {
    double approving = 0;
    for (const Approval& a : approvals) approving += a.weight;
    // approving >= q * active, exact in the rational: approving * den >= num * active.
    double lhs = approving * static_cast<double>(rule.quorum_fraction.den);
    double rhs = static_cast<double>(rule.quorum_fraction.num) * active_weight;
    if (lhs < rhs) return FinalizeOutcome::pending;
    auto it = finalized_.find(proposal.height);
    if (it != finalized_.end() && it->second != proposal.id)
        return FinalizeOutcome::conflicting_finalization;
    finalized_[proposal.height] = proposal.id;
    if (proposal.height > finalized_height_) finalized_height_ = proposal.height;
    return FinalizeOutcome::finalized;
}

std::optional<Digest> FinalityTracker::finalized_at(uint64_t height) const {
    auto it = finalized_.find(height);
    if (it == finalized_.end()) return std::nullopt;
    return it->second;
}

Confirmation confirmation_status(const ChainView& view, const Digest& block_id, uint64_t k) {
    const Block* b = view.find(block_id);
    if (!b) return Confirmation::unconfirmed;
    if (!view.on_tip_path(block_id)) return Confirmation::unconfirmed;
    return view.tip_height() - b->height >= k ? Confirmation::confirmed : Confirmation::unconfirmed;
}

uint64_t settled_height(const ChainView& view, const ConsensusRule& rule) {
    if (rule.kind == ConsensusKind::stable) return view.finalized_height();
    uint64_t th = view.tip_height();
    return th >= rule.confirmation_depth ? th - rule.confirmation_depth : 0;
}

}  // namespace chainsim
