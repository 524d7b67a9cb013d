#include "chainsim/replay.hpp"

#include <map>
#include <unordered_map>

#include "chainsim/community.hpp"

namespace chainsim {

namespace {

struct NodeState {
    const NodeSpec* spec = nullptr;
    bool active = false;
    Disposition disposition = Disposition::honest;
    uint8_t chain = 0;
    Digest tip;  // genesis initially
    uint64_t tip_height = 0;
    uint64_t finalized_height = 0;
};

}  // namespace

ReplayResult analyze_log(const EventLog& log) {
    ReplayResult out;
    out.scenario = log.scenario();
    out.seed = log.seed();
    out.event_log_digest = log.digest();
    const Scenario& sc = out.scenario;

    Block genesis = make_genesis();
    std::unordered_map<Digest, Block, DigestHash> blocks;
    blocks.emplace(genesis.id, genesis);

    std::map<std::string, NodeState> nodes;
    for (const NodeSpec& spec : sc.universe.nodes) {
        NodeState ns;
        ns.spec = &spec;
        ns.disposition = spec.disposition;
        ns.tip = genesis.id;
        nodes[spec.id] = ns;
    }

    uint8_t reference_chain = 0;
    std::map<uint8_t, uint64_t> chain_finalized;
    uint64_t last_ref_tip_height = 0;
    double cost_cum = 0;
    std::vector<double> costs(sc.horizon, 0.0);
    uint64_t reference_round = sc.shutdown.reference_round(sc.horizon);
    std::vector<Block> reference_chain_blocks;
    bool reference_captured = false;

    auto served_of = [&](const NodeState& ns) {
        ServedChain s;
        s.owner = ns.spec->id;
        const Block* b = &blocks.at(ns.tip);
        std::vector<Block> path;
        while (true) {
            path.push_back(*b);
            if (b->height == 0) break;
            auto it = blocks.find(b->parent_id);
            if (it == blocks.end()) break;
            b = &it->second;
        }
        std::reverse(path.begin(), path.end());
        s.blocks = std::move(path);
        s.finalized_height = ns.finalized_height;
        return s;
    };

    auto snapshot_now = [&](uint64_t round) {
        CommunitySnapshot snap;
        snap.round = round;
        for (const auto& [id, ns] : nodes) {
            snap.disposition[id] = ns.disposition;
            if (ns.active) {
                snap.active.insert(id);
                if (ns.disposition == Disposition::honest)
                    snap.honest_weight += ns.spec->weight;
                else
                    snap.dishonest_weight += ns.spec->weight;
            }
        }
        return snap;
    };

    size_t cursor = 0;
    const auto& events = log.events();
    for (uint64_t round = 0; round < sc.horizon; ++round) {
        uint32_t blocks_this_round = 0;
        uint32_t honest_productions = 0;
        uint32_t honest_approvals = 0;

        while (cursor < events.size() && events[cursor].round == round) {
            const SimEvent& ev = events[cursor];
            ++cursor;
            if (auto* e = std::get_if<EvBlockProduced>(&ev.payload)) {
                blocks.emplace(e->block.id, e->block);
                ++blocks_this_round;
                ++out.blocks_produced_total;
                if (nodes.at(e->producer).disposition == Disposition::honest) ++honest_productions;
            } else if (auto* e = std::get_if<EvNodeJoined>(&ev.payload)) {
                nodes.at(e->node).active = true;
            } else if (auto* e = std::get_if<EvNodeLeft>(&ev.payload)) {
                nodes.at(e->node).active = false;
            } else if (auto* e = std::get_if<EvDefection>(&ev.payload)) {
                nodes.at(e->node).disposition = Disposition::dishonest;
            } else if (auto* e = std::get_if<EvTipChanged>(&ev.payload)) {
                NodeState& ns = nodes.at(e->node);
                ns.tip = e->tip;
                ns.tip_height = e->height;
            } else if (auto* e = std::get_if<EvFinalized>(&ev.payload)) {
                uint64_t& cf = chain_finalized[e->chain];
                cf = std::max(cf, e->height);
                honest_approvals += static_cast<uint32_t>(e->approvers.size());
                for (auto& [id, ns] : nodes) {
                    if (ns.active && ns.chain == e->chain)
                        ns.finalized_height = std::max(ns.finalized_height, e->height);
                }
            } else if (auto* e = std::get_if<EvShutdownStep>(&ev.payload)) {
                if (e->code == ShutdownCode::fork_activated) {
                    reference_chain = 1;
                } else if (e->code == ShutdownCode::node_adopted) {
                    NodeState& ns = nodes.at(e->node);
                    ns.chain = 1;
                    ns.finalized_height = e->height;
                }
            }
        }

        // Mirror of the engine's analyzer phase.
        CommunitySnapshot snap = snapshot_now(round);
        ConsensusRule ref_rule =
            reference_chain == 1 ? ConsensusRule::make_stable() : sc.consensus;
        ModeState mode = mode_predicate(ref_rule, snap.honest_weight, snap.dishonest_weight);

        double cost = honest_productions + honest_approvals;
        for (const auto& [id, ns] : nodes)
            if (ns.active && ns.disposition == Disposition::honest) cost += 1;
        costs[round] = cost;
        cost_cum += cost;

        uint64_t tip_h = 0;
        bool any_honest = false;
        for (const auto& [id, ns] : nodes) {
            if (ns.active && ns.chain == reference_chain && ns.disposition == Disposition::honest) {
                any_honest = true;
                tip_h = std::max(tip_h, ns.tip_height);
            }
        }
        if (any_honest) last_ref_tip_height = tip_h;

        if (round % sc.analyzers.sample_every == 0) {
            ThicknessReport rep = thickness(sc.universe, snap, ref_rule, sc.analyzers.safety_factor);
            MetricsRow row;
            row.round = round;
            row.mode = mode.mode;
            row.honest_weight = snap.honest_weight;
            row.dishonest_weight = snap.dishonest_weight;
            row.lumpy = rep.lumpy;
            row.thin = rep.verdict == Thickness::thin;
            row.margin_to_flip = mode.margin_to_flip;
            row.tip_height = last_ref_tip_height;
            row.finalized_height = chain_finalized[reference_chain];
            row.blocks_this_round = blocks_this_round;
            row.honest_cost_cum = cost_cum;
            out.metrics.push_back(row);
        }

        if (!reference_captured && round == reference_round) {
            reference_captured = true;
            std::vector<ServedChain> served;
            for (const auto& [id, ns] : nodes) {
                if (ns.disposition == Disposition::honest && ns.chain == reference_chain)
                    served.push_back(served_of(ns));
            }
            if (!served.empty()) {
                ChainView merged = merge_served(served);
                reference_chain_blocks = merged.tip_prefix(merged.tip_height());
            }
        }
    }

    if (!reference_captured) {
        std::vector<ServedChain> served;
        for (const auto& [id, ns] : nodes) {
            if (ns.disposition == Disposition::honest && ns.chain == reference_chain)
                served.push_back(served_of(ns));
        }
        if (!served.empty()) {
            ChainView merged = merge_served(served);
            reference_chain_blocks = merged.tip_prefix(merged.tip_height());
        }
    }

    std::vector<ServedChain> live;
    for (const auto& [id, ns] : nodes)
        if (ns.active) live.push_back(served_of(ns));
    out.verdict = evaluate_good_ending(reference_chain_blocks, live, sc.shutdown, sc.horizon, costs);
    return out;
}

ReplayResult analyze_file(const std::string& path) { return analyze_log(EventLog::load(path)); }

}  // namespace chainsim
