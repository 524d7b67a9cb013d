#include "chainsim/engine.hpp"

#include <algorithm>
#include <cassert>

namespace chainsim {

namespace {

struct NodeRt {
    const NodeSpec* spec = nullptr;
    bool active = false;
    Disposition disposition = Disposition::honest;
    uint8_t chain = 0;
    ChainView view;
    StrategyRuntime strat;
    Action action;  // this round's intent
    Digest last_emitted_tip;
};

struct ChainCtx {
    uint8_t id = 0;
    ConsensusRule rule;
    FinalityTracker finality;
    Mempool mempool;
    Rng election;
    bool redirect_pending = false;  // next block carries a redirect record
};

struct BlockMsg {
    std::string sender;
    uint8_t chain = 0;
    std::vector<Block> blocks;  // ascending height
};

struct PendingLeave {
    std::string node;
    std::string reason;
};

std::string payload_text(uint8_t chain, uint64_t height, uint64_t round, const std::string& producer) {
    return "payload chain=" + std::to_string(chain) + " height=" + std::to_string(height) +
           " round=" + std::to_string(round) + " producer=" + producer;
}

}  // namespace

struct SimEngine::Impl {
    Scenario scenario;
    uint64_t seed;
    EventLog log;
    CommunityTracker tracker;
    Rng churn_rng;
    std::vector<NodeRt> nodes;  // ascending id
    std::map<std::string, size_t> index;
    std::vector<ChainCtx> chains;
    uint8_t reference_chain = 0;
    std::map<uint64_t, std::vector<BlockMsg>> inbox;
    std::map<uint64_t, MembershipOverrides> pending_joins;
    std::map<uint64_t, std::vector<PendingLeave>> pending_leaves;
    std::map<std::string, std::string> suppressions;  // victim -> suppressor
    uint64_t round = 0;

    // shutdown state
    bool archive_step_done = false;
    bool signaling_open = false;
    HardForkOutcome fork_outcome;
    std::optional<Digest> final_placed;
    uint64_t final_placed_height = 0;
    bool final_displaced_logged = false;
    bool final_settled_logged = false;
    std::string latest_commitment_hex;
    std::set<std::pair<std::string, Digest>> freeze_conflicts_seen;
    std::set<std::pair<std::string, std::string>> splits_seen;

    // outputs under construction
    std::vector<MetricsRow> metrics;
    std::vector<RoundAnalyzers> analyzer_trace;
    std::vector<double> costs;
    std::vector<Snapshot> archives;
    Bulletin bulletin;
    std::optional<Mode> last_mode;
    uint64_t last_ref_tip_height = 0;
    double cost_cum = 0;
    uint64_t blocks_total = 0;
    std::vector<Block> reference_chain_blocks;
    bool reference_captured = false;

    // per-round scratch
    uint32_t blocks_this_round = 0;
    uint32_t honest_productions = 0;
    uint32_t honest_approvals = 0;
    std::vector<std::pair<std::string, double>> willing_all;

    Impl(const Scenario& s, uint64_t sd)
        : scenario(s),
          seed(sd),
          log(s, sd),
          tracker(scenario.universe, s.churn),
          churn_rng(sd, "churn") {
        for (const NodeSpec& spec : scenario.universe.nodes) {
            NodeRt rt;
            rt.spec = &spec;
            rt.disposition = spec.disposition;
            rt.view = ChainView(spec.id);
            rt.strat.best_public_tip = rt.view.genesis().id;
            rt.strat.best_public_height = 0;
            rt.last_emitted_tip = rt.view.tip();
            nodes.push_back(std::move(rt));
        }
        std::sort(nodes.begin(), nodes.end(),
                  [](const NodeRt& a, const NodeRt& b) { return a.spec->id < b.spec->id; });
        for (size_t i = 0; i < nodes.size(); ++i) index[nodes[i].spec->id] = i;

        ChainCtx c0;
        c0.id = 0;
        c0.rule = scenario.consensus;
        c0.election = Rng(seed, "election/0");
        chains.push_back(std::move(c0));

        // Late dominators enter by directive at their attack round.
        for (const NodeSpec& spec : scenario.universe.nodes) {
            if (spec.strategy == StrategyKind::late_dominator)
                pending_joins[static_cast<uint64_t>(spec.params.attack_start_round)]
                    .force_join.push_back(spec.id);
        }
        costs.assign(scenario.horizon, 0.0);

        if (scenario.shutdown.procedure == Procedure::hard_fork_to_stable)
            fork_outcome.state = HardForkOutcome::State::pending;
    }

    NodeRt& node(const std::string& id) { return nodes[index.at(id)]; }

    double chain_active_weight(uint8_t chain) const {
        double w = 0;
        for (const NodeRt& n : nodes)
            if (n.active && n.chain == chain) w += n.spec->weight;
        return w;
    }

    size_t chain_follower_count(uint8_t chain) const {
        size_t c = 0;
        for (const NodeRt& n : nodes)
            if (n.active && n.chain == chain) ++c;
        return c;
    }

    bool suppressed(const std::string& id, std::string* by) const {
        auto it = suppressions.find(id);
        if (it == suppressions.end()) return false;
        // Suppression holds only while the suppressor itself is active.
        const NodeRt& s = nodes[index.at(it->second)];
        if (!s.active) return false;
        if (by) *by = it->second;
        return true;
    }

    void note_public(NodeRt& n, const Block& b) {
        if (b.height > n.strat.best_public_height) {
            n.strat.best_public_height = b.height;
            n.strat.best_public_tip = b.id;
        }
    }

    // Delivers `b` into dst, pulling missing ancestors from src. Returns true
    // if dst accepted anything new.
    bool deliver_with_ancestors(NodeRt& dst, const ChainView& src, const Block& b) {
        if (dst.view.contains(b.id)) return false;
        std::vector<const Block*> missing{&b};
        const Block* cur = &b;
        while (cur->height > 0 && !dst.view.contains(cur->parent_id)) {
            const Block* parent = src.find(cur->parent_id);
            if (!parent) break;  // sender no longer serves the ancestry
            missing.push_back(parent);
            cur = parent;
        }
        bool any = false;
        for (auto it = missing.rbegin(); it != missing.rend(); ++it) {
            BlockValidity v = dst.view.accept(**it);
            if (v == BlockValidity::ok) {
                any = true;
                note_public(dst, **it);
                check_freeze_conflict(dst, **it);
            }
        }
        return any;
    }

    void check_freeze_conflict(NodeRt& n, const Block& b) {
        if (!scenario.shutdown.freeze_depth || n.view.frozen_height() == 0) return;
        if (b.height > n.view.tip_height() && n.view.violates_prefix(b.id)) {
            auto key = std::make_pair(n.spec->id, b.id);
            if (freeze_conflicts_seen.insert(key).second) {
                log.push(round, EvSafetyViolation{ViolationCode::freeze_conflict, n.spec->id, "",
                                                  b.height,
                                                  "longer branch rejected by frozen prefix"});
            }
        }
    }

    // ---- phase A: delivery -------------------------------------------------

    void deliver_round() {
        auto it = inbox.find(round);
        if (it == inbox.end()) return;
        for (const BlockMsg& msg : it->second) {
            for (NodeRt& n : nodes) {
                if (!n.active || n.chain != msg.chain || n.spec->id == msg.sender) continue;
                std::string by;
                if (suppressed(msg.sender, &by) || suppressed(n.spec->id, &by)) {
                    log.push(round, EvSuppression{by, msg.sender, n.spec->id});
                    continue;
                }
                const ChainView& src = node(msg.sender).view;
                for (const Block& b : msg.blocks) deliver_with_ancestors(n, src, b);
            }
        }
        inbox.erase(it);
    }

    // ---- phase B: fees + churn ---------------------------------------------

    void update_communities() {
        MembershipOverrides ov;
        auto ji = pending_joins.find(round);
        if (ji != pending_joins.end()) ov = ji->second;
        std::map<std::string, std::string> leave_reasons;
        auto li = pending_leaves.find(round);
        if (li != pending_leaves.end()) {
            for (const PendingLeave& pl : li->second) {
                ov.force_leave.push_back(pl.node);
                leave_reasons[pl.node] = pl.reason;
            }
        }
        auto res = tracker.step(round, churn_rng, ov);
        for (const std::string& id : res.joined) {
            NodeRt& n = node(id);
            n.active = true;
            log.push(round, EvNodeJoined{id, n.spec->weight,
                                         static_cast<uint8_t>(n.disposition)});
        }
        for (const std::string& id : res.left) {
            NodeRt& n = node(id);
            n.active = false;
            std::string reason;
            auto lr = leave_reasons.find(id);
            if (lr != leave_reasons.end())
                reason = lr->second;
            else if (n.spec->leave_round && *n.spec->leave_round == round)
                reason = "scheduled";
            else
                reason = "churn";
            log.push(round, EvNodeLeft{id, reason});
        }
        pending_joins.erase(round);
        pending_leaves.erase(round);

        for (ChainCtx& c : chains)
            if (chain_follower_count(c.id) > 0) c.mempool.fee_mass += scenario.fees_per_round;
    }

    // ---- phase C: strategy evaluation --------------------------------------

    std::optional<Digest> final_marker_on_tip(const ChainView& v, uint64_t* height) const {
        const Block* b = v.find(v.tip());
        while (b) {
            if (b->marker == BlockMarker::final) {
                if (height) *height = b->height;
                return b->id;
            }
            if (b->height == 0) break;
            b = v.find(b->parent_id);
        }
        return std::nullopt;
    }

    void evaluate_strategies() {
        suppressions.clear();
        const ShutdownPlan& plan = scenario.shutdown;
        uint64_t T = plan.trigger_round.value_or(0);
        bool final_phase = plan.procedure == Procedure::final_block && plan.trigger_round &&
                           round >= T;
        bool signal_phase = plan.procedure == Procedure::hard_fork_to_stable &&
                            plan.trigger_round && round >= T && round <= T + plan.adoption_window &&
                            fork_outcome.state == HardForkOutcome::State::pending;

        for (NodeRt& n : nodes) {
            n.action = Action{};
            if (!n.active) continue;
            ChainCtx& ctx = chains[n.chain];

            // Arm the rewrite fork before deciding, so the first attack-round
            // production already extends the private fork.
            bool rewriter = n.spec->strategy == StrategyKind::rewrite_attacker ||
                            n.spec->strategy == StrategyKind::late_dominator;
            if (rewriter && !n.strat.attack_started &&
                static_cast<int64_t>(round) >= n.spec->params.attack_start_round) {
                start_rewrite_fork(n);
            }

            DecisionContext dc;
            dc.round = round;
            dc.view = &n.view;
            dc.mempool = &ctx.mempool;
            dc.rule = ctx.rule;
            dc.own_weight = n.spec->weight;
            dc.active_weight = chain_active_weight(n.chain);
            dc.final_block_phase = final_phase && n.chain == reference_chain;
            dc.signaling_phase = signal_phase && n.chain == 0;
            dc.latest_commitment_hex = latest_commitment_hex;
            if (scenario.shutdown.procedure == Procedure::final_block) {
                uint64_t fh = 0;
                if (auto fid = final_marker_on_tip(n.view, &fh)) {
                    dc.final_block_on_tip = fid;
                    dc.final_block_height = fh;
                }
            }

            n.action = decide_action(*n.spec, n.strat, dc);

            if (n.action.defect_now && !n.strat.defected) {
                n.strat.defected = true;
                n.disposition = Disposition::dishonest;
                tracker.flip_disposition(n.spec->id, Disposition::dishonest);
                log.push(round, EvDefection{n.spec->id, n.spec->weight, dc.active_weight});
                start_rewrite_fork(n);
            }
            if (n.action.submit_signal && !n.strat.signaled) {
                n.strat.signaled = true;
                Record r;
                r.record_id = "signal-" + n.spec->id;
                r.kind = RecordKind::adoption_signal;
                std::string body = n.spec->id;
                r.body.assign(body.begin(), body.end());
                chains[0].mempool.pending.push_back(std::move(r));
            }
            if (!n.action.suppress.empty()) {
                for (const std::string& v : n.action.suppress) suppressions[v] = n.spec->id;
            }
            if (n.action.depart) {
                pending_leaves[round + 1].push_back({n.spec->id, "shutdown"});
                log.push(round,
                         EvShutdownStep{ShutdownCode::depart_directive, n.spec->id, 0, {}, ""});
            }
        }
    }

    void start_rewrite_fork(NodeRt& n) {
        int64_t target = n.spec->params.target_height;
        uint64_t tip_h = n.view.tip_height();
        uint64_t t = target < 0 ? tip_h : std::min<uint64_t>(static_cast<uint64_t>(target), tip_h);
        auto fid = n.view.tip_path_at(t);
        n.strat.fork_tip = fid;
        n.strat.fork_height = t;
        n.strat.attack_started = true;
    }

    // ---- phase D: election + production ------------------------------------

    Block build_block(NodeRt& producer, ChainCtx& ctx) {
        const Action& a = producer.action;
        const Block* parent = producer.view.find(a.parent);
        assert(parent);
        Block b;
        b.parent_id = parent->id;
        b.height = parent->height + 1;
        b.producer = producer.spec->id;
        b.round = round;

        if (a.withhold) {
            // Rewriting: displace the public block at this height, mutating
            // its records; beyond the public tip, pad with own data.
            auto displaced_id = producer.view.ancestor_at(producer.strat.best_public_tip, b.height);
            const Block* displaced = displaced_id ? producer.view.find(*displaced_id) : nullptr;
            if (displaced && !displaced->records.empty()) {
                for (const Record& orig : displaced->records) {
                    Record m;
                    m.record_id = orig.record_id;
                    m.kind = orig.kind;
                    std::string prefix = "rewritten by " + producer.spec->id + ": ";
                    m.body.assign(prefix.begin(), prefix.end());
                    m.body.insert(m.body.end(), orig.body.begin(), orig.body.end());
                    if (m.body.size() > kMaxRecordBody) m.body.resize(kMaxRecordBody);
                    b.records.push_back(std::move(m));
                }
            } else {
                b.records.push_back(Record::data_record(
                    "rec-c" + std::to_string(ctx.id) + "-h" + std::to_string(b.height) + "-r" +
                        std::to_string(round) + "-p" + producer.spec->id,
                    payload_text(ctx.id, b.height, round, producer.spec->id)));
            }
            b.seal();
            return b;
        }

        if (a.make_final) {
            b.marker = BlockMarker::final;
            Record r;
            r.record_id = "final-c" + std::to_string(ctx.id) + "-r" + std::to_string(round);
            r.kind = RecordKind::final_marker_payload;
            r.body.assign(latest_commitment_hex.begin(), latest_commitment_hex.end());
            b.records.push_back(std::move(r));
            b.seal();
            return b;
        }

        if (scenario.shutdown.procedure == Procedure::final_block) {
            uint64_t fh = 0;
            if (final_marker_on_tip(producer.view, &fh)) {
                // Burying blocks: confirmation weight only, no new data.
                b.seal();
                return b;
            }
        }

        if (ctx.redirect_pending) {
            Record r;
            r.record_id = "redirect-c" + std::to_string(ctx.id);
            r.kind = RecordKind::redirect;
            std::string body = "continued on chain " + std::to_string(ctx.id) + " from height " +
                               std::to_string(fork_outcome.fork_point) + " digest " +
                               fork_outcome.fork_point_digest.hex();
            r.body.assign(body.begin(), body.end());
            b.records.push_back(std::move(r));
            ctx.redirect_pending = false;
        }
        // Drain the pool; censoring producers leave adoption signals behind.
        std::vector<Record> keep;
        for (Record& r : ctx.mempool.pending) {
            if (a.censor_signals && r.kind == RecordKind::adoption_signal)
                keep.push_back(std::move(r));
            else
                b.records.push_back(std::move(r));
        }
        ctx.mempool.pending = std::move(keep);
        b.records.push_back(Record::data_record(
            "rec-c" + std::to_string(ctx.id) + "-h" + std::to_string(b.height) + "-r" +
                std::to_string(round) + "-p" + producer.spec->id,
            payload_text(ctx.id, b.height, round, producer.spec->id)));
        b.seal();
        return b;
    }

    void produce_blocks() {
        blocks_this_round = 0;
        honest_productions = 0;
        honest_approvals = 0;
        willing_all.clear();

        for (ChainCtx& ctx : chains) {
            std::vector<std::pair<std::string, double>> willing;
            for (const NodeRt& n : nodes) {
                if (n.active && n.chain == ctx.id && n.action.willing)
                    willing.emplace_back(n.spec->id, n.spec->weight);
            }
            willing_all.insert(willing_all.end(), willing.begin(), willing.end());
            auto elected = elect_producer(willing, ctx.election);
            if (!elected) continue;

            NodeRt& p = node(*elected);
            Block b = build_block(p, ctx);
            bool withheld = p.action.withhold;
            p.view.accept(b);
            ++blocks_this_round;
            ++blocks_total;
            if (p.disposition == Disposition::honest) ++honest_productions;
            log.push(round, EvBlockProduced{ctx.id, p.spec->id, b, !withheld});

            if (withheld) {
                p.strat.unpublished.push_back(b);
                p.strat.fork_tip = b.id;
                p.strat.fork_height = b.height;
                continue;
            }
            // Producing claims the pending fees.
            ctx.mempool.fee_mass = 0;
            note_public(p, b);

            if (ctx.rule.kind == ConsensusKind::stable) {
                run_committee(ctx, p, b);
            } else {
                inbox[round + 1].push_back(BlockMsg{p.spec->id, ctx.id, {b}});
            }
        }
    }

    // Synchronous committee: same-round delivery and finality votes.
    void run_committee(ChainCtx& ctx, NodeRt& producer, const Block& b) {
        std::vector<Approval> approvals;
        if (producer.disposition == Disposition::honest)
            approvals.push_back({producer.spec->id, producer.spec->weight});
        for (NodeRt& n : nodes) {
            if (!n.active || n.chain != ctx.id || n.spec->id == producer.spec->id) continue;
            std::string by;
            if (suppressed(producer.spec->id, &by) || suppressed(n.spec->id, &by)) {
                log.push(round, EvSuppression{by, producer.spec->id, n.spec->id});
                continue;
            }
            deliver_with_ancestors(n, producer.view, b);
            if (n.disposition == Disposition::honest && n.view.contains(b.id) &&
                !n.view.violates_prefix(b.id)) {
                approvals.push_back({n.spec->id, n.spec->weight});
            }
        }
        double active_w = chain_active_weight(ctx.id);
        FinalizeOutcome out = ctx.finality.finalize_step(ctx.rule, b, approvals, active_w);
        if (out == FinalizeOutcome::finalized) {
            double w = 0;
            std::vector<std::string> names;
            for (const Approval& a : approvals) {
                w += a.weight;
                names.push_back(a.node);
            }
            honest_approvals += static_cast<uint32_t>(names.size());
            log.push(round, EvFinalized{ctx.id, b.id, b.height, w, names});
            for (NodeRt& n : nodes) {
                if (n.active && n.chain == ctx.id) n.view.mark_finalized(b.id, b.height);
            }
        } else if (out == FinalizeOutcome::conflicting_finalization) {
            log.push(round, EvSafetyViolation{ViolationCode::conflicting_finalization,
                                              producer.spec->id, "", b.height,
                                              "second finalized block at height"});
        }
    }

    // ---- phase E: fork publication -----------------------------------------

    void publish_forks() {
        for (NodeRt& n : nodes) {
            if (!n.active || !n.strat.attack_started || n.strat.unpublished.empty()) continue;
            if (n.strat.fork_height <= n.strat.best_public_height) continue;
            log.push(round, EvForkPublished{n.chain, n.spec->id, n.strat.fork_height,
                                            static_cast<uint32_t>(n.strat.unpublished.size())});
            inbox[round + 1].push_back(BlockMsg{n.spec->id, n.chain, n.strat.unpublished});
            n.strat.best_public_height = n.strat.fork_height;
            n.strat.best_public_tip = *n.strat.fork_tip;
            n.strat.unpublished.clear();
        }
    }

    // ---- phase F: shutdown procedures --------------------------------------

    ChainView merged_active_honest(uint8_t chain) const {
        std::vector<ServedChain> served;
        for (const NodeRt& n : nodes) {
            if (n.active && n.chain == chain && n.disposition == Disposition::honest)
                served.push_back(ServedChain::from_view(n.view));
        }
        return merge_served(served);
    }

    ChainView merged_active(uint8_t chain) const {
        std::vector<ServedChain> served;
        for (const NodeRt& n : nodes) {
            if (n.active && n.chain == chain) served.push_back(ServedChain::from_view(n.view));
        }
        return merge_served(served);
    }

    void take_archives() {
        log.push(round, EvShutdownStep{ShutdownCode::archive_directive, "", 0, {}, ""});
        for (NodeRt& n : nodes) {
            if (!n.active || n.disposition != Disposition::honest || n.chain != reference_chain)
                continue;
            ChainCtx& ctx = chains[n.chain];
            uint64_t settled = settled_height(n.view, ctx.rule);
            Snapshot s = snapshot_chain(n.view, settled, n.spec->id, round, ctx.rule);
            log.push(round, EvSnapshotTaken{n.spec->id, n.chain, s.height, s.digest});
            latest_commitment_hex = s.digest.hex();
            if (scenario.bulletin_reachable) {
                uint64_t idx = bulletin.append(s.digest, round, n.spec->id);
                log.push(round, EvCommitmentPublished{s.digest, n.spec->id, round, idx});
            }
            archives.push_back(std::move(s));
        }
    }

    // Runs before strategies so the round-T final block can already carry
    // the commitment digest.
    void shutdown_pre_steps() {
        const ShutdownPlan& plan = scenario.shutdown;
        if (plan.procedure == Procedure::none || !plan.trigger_round) return;
        if ((plan.procedure == Procedure::final_block ||
             plan.procedure == Procedure::abandon_and_archive) &&
            round == *plan.trigger_round && !archive_step_done) {
            archive_step_done = true;
            take_archives();
        }
    }

    void shutdown_steps() {
        const ShutdownPlan& plan = scenario.shutdown;
        if (plan.freeze_depth) apply_freeze();
        if (plan.procedure == Procedure::none || !plan.trigger_round) return;
        uint64_t T = *plan.trigger_round;

        if (plan.procedure == Procedure::abandon_and_archive && round == T) {
            for (NodeRt& n : nodes) {
                if (n.active && n.disposition == Disposition::honest) {
                    pending_leaves[round + 1].push_back({n.spec->id, "abandon"});
                    log.push(round, EvShutdownStep{ShutdownCode::depart_directive, n.spec->id, 0,
                                                   {}, "abandon_and_archive"});
                }
            }
        }

        if (plan.procedure == Procedure::final_block) monitor_final_block();

        if (plan.procedure == Procedure::hard_fork_to_stable) run_hard_fork_step(T);
    }

    void monitor_final_block() {
        // Placement is judged on what the honest community serves; displacement
        // on what the whole live network serves.
        if (!final_placed) {
            ChainView honest = merged_active_honest(reference_chain);
            const Block* b = honest.find(honest.tip());
            while (b) {
                if (b->marker == BlockMarker::final) {
                    final_placed = b->id;
                    final_placed_height = b->height;
                    log.push(round, EvShutdownStep{ShutdownCode::final_block_placed, b->producer,
                                                   b->height, b->id, ""});
                    break;
                }
                if (b->height == 0) break;
                b = honest.find(b->parent_id);
            }
        }
        if (final_placed && !final_settled_logged) {
            ChainCtx& ctx = chains[reference_chain];
            ChainView honest = merged_active_honest(reference_chain);
            bool settled = false;
            if (ctx.rule.kind == ConsensusKind::stable) {
                settled = ctx.finality.finalized_height() >= final_placed_height &&
                          ctx.finality.finalized_at(final_placed_height) == *final_placed;
            } else if (honest.contains(*final_placed)) {
                settled = confirmation_status(honest, *final_placed, ctx.rule.confirmation_depth) ==
                          Confirmation::confirmed;
            }
            if (settled) {
                final_settled_logged = true;
                log.push(round, EvShutdownStep{ShutdownCode::final_block_settled, "",
                                               final_placed_height, *final_placed, ""});
            }
        }
        if (final_placed && !final_displaced_logged && chain_follower_count(reference_chain) > 0) {
            ChainView live = merged_active(reference_chain);
            bool on_path = live.contains(*final_placed) && live.on_tip_path(*final_placed);
            if (!on_path) {
                final_displaced_logged = true;
                log.push(round, EvShutdownStep{ShutdownCode::final_block_displaced, "",
                                               final_placed_height, *final_placed, ""});
            }
        }
    }

    void run_hard_fork_step(uint64_t T) {
        if (fork_outcome.state != HardForkOutcome::State::pending) return;
        if (round < T) return;
        if (round == T)
            log.push(round, EvShutdownStep{ShutdownCode::signaling_started, "", 0, {},
                                           "adoption window " + std::to_string(plan_window())});

        // Adoption is measured on the confirmed prefix of the old chain.
        ChainView honest = merged_active_honest(0);
        uint64_t settled = settled_height(honest, chains[0].rule);
        double signal_weight = 0;
        std::vector<std::string> signalers;
        for (const Block& b : honest.tip_prefix(settled)) {
            for (const Record& rec : b.records) {
                if (rec.kind != RecordKind::adoption_signal) continue;
                std::string who(rec.body.begin(), rec.body.end());
                const NodeSpec* spec = scenario.universe.find(who);
                if (spec && std::find(signalers.begin(), signalers.end(), who) == signalers.end()) {
                    signalers.push_back(who);
                    signal_weight += spec->weight;
                }
            }
        }
        double active_total = chain_active_weight(0);
        const Rational& th = scenario.shutdown.adoption_threshold;
        bool reached = signal_weight * static_cast<double>(th.den) >=
                       static_cast<double>(th.num) * active_total;
        if (reached && !signalers.empty()) {
            activate_fork(settled, signalers);
            return;
        }
        if (round == T + plan_window()) {
            fork_outcome.state = HardForkOutcome::State::failed;
            log.push(round, EvShutdownStep{ShutdownCode::fork_failed, "", 0, {},
                                           "adoption window expired"});
        }
    }

    uint64_t plan_window() const { return scenario.shutdown.adoption_window; }

    void activate_fork(uint64_t fork_point, const std::vector<std::string>& signalers) {
        ChainView honest = merged_active_honest(0);
        std::vector<Block> prefix = honest.tip_prefix(fork_point);
        Digest fp_digest = honest.chain_digest(fork_point);

        ChainCtx fork;
        fork.id = 1;
        fork.rule = ConsensusRule::make_stable();
        fork.election = Rng(seed, "election/1");
        fork.redirect_pending = true;
        chains.push_back(std::move(fork));

        fork_outcome.state = HardForkOutcome::State::activated;
        fork_outcome.fork_point = fork_point;
        fork_outcome.activation_round = round;
        fork_outcome.fork_point_digest = fp_digest;
        reference_chain = 1;
        log.push(round, EvShutdownStep{ShutdownCode::fork_activated, "", fork_point, fp_digest,
                                       "stable rule 2/3"});

        for (const std::string& id : signalers) {
            NodeRt& n = node(id);
            if (!n.active || n.disposition != Disposition::honest || !n.spec->params.adopt_hard_fork)
                continue;
            ChainView nv(n.spec->id);
            for (const Block& b : prefix) {
                if (b.height == 0) continue;
                nv.accept(b);
            }
            if (fork_point > 0) nv.mark_finalized(prefix.back().id, fork_point);
            n.view = std::move(nv);
            n.chain = 1;
            log.push(round, EvShutdownStep{ShutdownCode::node_adopted, id, fork_point, fp_digest, ""});
        }
    }

    void apply_freeze() {
        uint64_t d = *scenario.shutdown.freeze_depth;
        for (NodeRt& n : nodes) {
            if (n.active) n.view.apply_freeze_rule(d);
        }
        // Permanent split: two nodes whose frozen prefixes conflict.
        for (size_t i = 0; i < nodes.size(); ++i) {
            if (!nodes[i].active || nodes[i].view.frozen_height() == 0) continue;
            for (size_t j = i + 1; j < nodes.size(); ++j) {
                if (!nodes[j].active || nodes[j].chain != nodes[i].chain ||
                    nodes[j].view.frozen_height() == 0)
                    continue;
                uint64_t m = std::min(nodes[i].view.frozen_height(), nodes[j].view.frozen_height());
                auto a = nodes[i].view.tip_path_at(m);
                auto b = nodes[j].view.tip_path_at(m);
                if (a && b && *a != *b) {
                    auto key = std::make_pair(nodes[i].spec->id, nodes[j].spec->id);
                    if (splits_seen.insert(key).second) {
                        log.push(round,
                                 EvSafetyViolation{ViolationCode::permanent_split,
                                                   nodes[i].spec->id, nodes[j].spec->id, m,
                                                   "incompatible frozen prefixes"});
                    }
                }
            }
        }
    }

    // ---- phase G: analyzers + metrics --------------------------------------

    void analyze_round() {
        const CommunitySnapshot& snap = tracker.current();
        ChainCtx& ref = chains[reference_chain];
        ModeState mode = mode_predicate(ref.rule, snap.honest_weight, snap.dishonest_weight);
        if (!last_mode || *last_mode != mode.mode) {
            last_mode = mode.mode;
            log.push(round, EvModeChanged{static_cast<uint8_t>(mode.mode), mode.margin_to_flip});
        }

        double cost = honest_productions + honest_approvals;
        for (const NodeRt& n : nodes)
            if (n.active && n.disposition == Disposition::honest) cost += 1;  // keep-alive
        costs[round] = cost;
        cost_cum += cost;

        uint64_t tip_h = 0;
        bool any_honest = false;
        for (const NodeRt& n : nodes) {
            if (n.active && n.chain == reference_chain && n.disposition == Disposition::honest) {
                any_honest = true;
                tip_h = std::max(tip_h, n.view.tip_height());
            }
        }
        if (any_honest)
            last_ref_tip_height = tip_h;

        if (round % scenario.analyzers.sample_every == 0) {
            ThicknessReport rep =
                thickness(scenario.universe, snap, ref.rule, scenario.analyzers.safety_factor);

            RoundAnalyzers ra;
            ra.round = round;
            ra.mode = mode.mode;
            ra.honest_weight = snap.honest_weight;
            ra.dishonest_weight = snap.dishonest_weight;
            ra.membership = rep;
            CommunitySnapshot willing_snap;
            willing_snap.round = round;
            for (const auto& [id, w] : willing_all) {
                willing_snap.active.insert(id);
                ra.willing_weight += w;
            }
            willing_snap.disposition = snap.disposition;
            for (const auto& id : willing_snap.active) {
                const NodeSpec* spec = scenario.universe.find(id);
                if (snap.disposition.at(id) == Disposition::honest)
                    willing_snap.honest_weight += spec->weight;
                else
                    willing_snap.dishonest_weight += spec->weight;
            }
            ra.willing_count = static_cast<uint32_t>(willing_snap.active.size());
            ra.production_thin =
                willing_snap.active.empty() ||
                thickness(scenario.universe, willing_snap, ref.rule, scenario.analyzers.safety_factor)
                        .verdict == Thickness::thin;
            analyzer_trace.push_back(ra);

            MetricsRow row;
            row.round = round;
            row.mode = mode.mode;
            row.honest_weight = snap.honest_weight;
            row.dishonest_weight = snap.dishonest_weight;
            row.lumpy = rep.lumpy;
            row.thin = rep.verdict == Thickness::thin;
            row.margin_to_flip = mode.margin_to_flip;
            row.tip_height = last_ref_tip_height;
            row.finalized_height = ref.finality.finalized_height();
            row.blocks_this_round = blocks_this_round;
            row.honest_cost_cum = cost_cum;
            metrics.push_back(row);
        }
    }

    // ---- phase H: tip change events ----------------------------------------

    void emit_tip_changes() {
        for (NodeRt& n : nodes) {
            if (n.view.tip() != n.last_emitted_tip) {
                n.last_emitted_tip = n.view.tip();
                log.push(round, EvTipChanged{n.chain, n.spec->id, n.view.tip(),
                                             n.view.tip_height()});
            }
        }
    }

    void capture_reference_if_due() {
        uint64_t ref_round = scenario.shutdown.reference_round(scenario.horizon);
        if (reference_captured || round != ref_round) return;
        reference_captured = true;
        reference_chain_blocks = compute_reference_chain();
    }

    std::vector<Block> compute_reference_chain() {
        std::vector<ServedChain> served;
        for (const NodeRt& n : nodes) {
            if (n.disposition == Disposition::honest && n.chain == reference_chain)
                served.push_back(ServedChain::from_view(n.view));
        }
        if (served.empty()) return {};
        ChainView merged = merge_served(served);
        return merged.tip_prefix(merged.tip_height());
    }

    void step() {
        deliver_round();
        update_communities();
        shutdown_pre_steps();
        evaluate_strategies();
        produce_blocks();
        publish_forks();
        shutdown_steps();
        analyze_round();
        emit_tip_changes();
        capture_reference_if_due();
        ++round;
    }

    SimResult finish() {
        SimResult res;
        if (!reference_captured) {
            reference_chain_blocks = compute_reference_chain();
            reference_captured = true;
        }
        std::vector<ServedChain> live;
        for (const NodeRt& n : nodes) {
            if (n.active) live.push_back(ServedChain::from_view(n.view));
            res.final_views.emplace(n.spec->id, n.view);
            res.node_chain[n.spec->id] = n.chain;
            if (n.active) res.active_at_horizon.insert(n.spec->id);
        }
        res.verdict = evaluate_good_ending(reference_chain_blocks, live, scenario.shutdown,
                                           scenario.horizon, costs);
        res.log = log;
        res.event_log_digest = res.log.digest();
        res.metrics = metrics;
        res.analyzer_trace = analyzer_trace;
        res.archives = archives;
        res.bulletin = bulletin;
        res.hard_fork = fork_outcome;
        res.honest_cost_per_round = costs;
        res.blocks_produced_total = blocks_total;
        res.reference_chain = reference_chain_blocks;
        return res;
    }
};

SimEngine::SimEngine(const Scenario& scenario, uint64_t seed)
    : impl_(std::make_unique<Impl>(scenario, seed)) {}

SimEngine::~SimEngine() = default;

void SimEngine::step() { impl_->step(); }

bool SimEngine::done() const { return impl_->round >= impl_->scenario.horizon; }

uint64_t SimEngine::round() const { return impl_->round; }

SimResult SimEngine::finish() { return impl_->finish(); }

const ChainView& SimEngine::view_of(const std::string& node_id) const {
    return impl_->nodes[impl_->index.at(node_id)].view;
}

bool SimEngine::is_active(const std::string& node_id) const {
    return impl_->nodes[impl_->index.at(node_id)].active;
}

SimResult run(const Scenario& scenario, uint64_t seed) {
    SimEngine engine(scenario, seed);
    while (!engine.done()) engine.step();
    return engine.finish();
}

}  // namespace chainsim
