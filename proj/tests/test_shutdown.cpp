#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chainsim/engine.hpp"
#include "chainsim/scenario.hpp"

using namespace chainsim;

namespace {

const SimEvent* find_step(const SimResult& r, ShutdownCode code) {
    for (const SimEvent& e : r.log.events()) {
        if (auto* s = std::get_if<EvShutdownStep>(&e.payload))
            if (s->code == code) return &e;
    }
    return nullptr;
}

uint64_t count_violations(const SimResult& r, ViolationCode code) {
    uint64_t n = 0;
    for (const SimEvent& e : r.log.events()) {
        if (auto* s = std::get_if<EvSafetyViolation>(&e.payload))
            if (s->code == code) ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("stable consensus with a final block reaches the good ending") {
    std::string j = R"({
        "name": "stable-final",
        "horizon": 40,
        "consensus": {"kind": "stable", "quorum_fraction": "2/3"},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h3", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h4", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "zz", "weight": 1, "disposition": "dishonest", "strategy": "rewrite_attacker",
             "params": {"attack_start_round": 5, "target_height": 1}}
        ],
        "shutdown": {"procedure": "final_block", "trigger_round": 10, "grace_rounds": 10}
    })";
    SimResult r = run(parse_scenario(j), 1);

    CHECK(r.verdict.stable);
    CHECK(r.verdict.cheap);
    CHECK(r.verdict.records_checked > 0);
    CHECK(r.verdict.records_mismatched == 0);

    const SimEvent* placed = find_step(r, ShutdownCode::final_block_placed);
    REQUIRE(placed != nullptr);
    CHECK(std::get<EvShutdownStep>(placed->payload).height >= 10);
    CHECK(find_step(r, ShutdownCode::final_block_settled) != nullptr);
    CHECK(find_step(r, ShutdownCode::final_block_displaced) == nullptr);

    // Archivists committed before the final block; its payload carries the
    // commitment digest.
    REQUIRE(!r.archives.empty());
    REQUIRE(!r.bulletin.entries.empty());
    const EvShutdownStep& p = std::get<EvShutdownStep>(placed->payload);
    const ChainView& v = r.final_views.at("zz");
    const Block* fb = v.find(p.digest);
    REQUIRE(fb != nullptr);
    REQUIRE(fb->records.size() == 1);
    CHECK(fb->records[0].kind == RecordKind::final_marker_payload);
    std::string payload(fb->records[0].body.begin(), fb->records[0].body.end());
    CHECK(payload == r.archives[0].digest.hex());

    // Honest nodes departed; no honest cost after the grace window.
    for (const std::string& id : {"h1", "h2", "h3", "h4"})
        CHECK(r.active_at_horizon.count(id) == 0);
    CHECK(r.verdict.honest_cost_after == 0.0);
    // Finality never regressed.
    CHECK(count_violations(r, ViolationCode::finality_regression) == 0);
}

TEST_CASE("procedure none issues no directives") {
    std::string j = R"({
        "name": "control",
        "horizon": 20,
        "consensus": {"kind": "unstable"},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"}
        ]
    })";
    SimResult r = run(parse_scenario(j), 2);
    for (const SimEvent& e : r.log.events()) CHECK(e.kind() != EventKind::shutdown_step);
    CHECK(r.verdict.stable);  // honest chain, fresh verifier agrees
    // No trigger round: the cost window is empty, so cheap holds vacuously.
    CHECK(r.verdict.cheap);
    CHECK(r.verdict.reference_round == 20);
}

TEST_CASE("unstable final block is displaced after honest departure") {
    std::string j = R"({
        "name": "displaced-final",
        "horizon": 120,
        "consensus": {"kind": "unstable", "confirmation_depth": 3},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h3", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "zz", "weight": 1, "disposition": "dishonest", "strategy": "rewrite_attacker",
             "params": {"attack_start_round": 5, "target_height": 1}}
        ],
        "shutdown": {"procedure": "final_block", "trigger_round": 12, "grace_rounds": 10}
    })";
    SimResult r = run(parse_scenario(j), 3);

    CHECK(find_step(r, ShutdownCode::final_block_placed) != nullptr);
    CHECK(find_step(r, ShutdownCode::final_block_settled) != nullptr);
    // Honest nodes bury the marker to depth k and leave; the lone attacker
    // then out-produces the frozen public chain and displaces it.
    CHECK(find_step(r, ShutdownCode::final_block_displaced) != nullptr);
    CHECK(!r.verdict.stable);
    CHECK(r.verdict.cheap);
}

TEST_CASE("hard fork: all-signaling community with one non-adopter splits cleanly") {
    std::string j = R"({
        "name": "fork-adopt",
        "horizon": 80,
        "consensus": {"kind": "unstable", "confirmation_depth": 3},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h3", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "hold", "weight": 1, "disposition": "honest", "strategy": "honest_default",
             "params": {"adopt_hard_fork": false}}
        ],
        "shutdown": {"procedure": "hard_fork_to_stable", "trigger_round": 10,
                     "adoption_threshold": "2/3", "adoption_window": 30, "grace_rounds": 10}
    })";
    SimResult r = run(parse_scenario(j), 4);

    REQUIRE(r.hard_fork.state == HardForkOutcome::State::activated);
    CHECK(find_step(r, ShutdownCode::fork_activated) != nullptr);

    // Adopters moved, the holdout stayed.
    CHECK(r.node_chain.at("h1") == 1);
    CHECK(r.node_chain.at("h2") == 1);
    CHECK(r.node_chain.at("h3") == 1);
    CHECK(r.node_chain.at("hold") == 0);

    // Shared prefix digest-equal on both sides of the split.
    uint64_t fp = r.hard_fork.fork_point;
    const ChainView& new_chain = r.final_views.at("h1");
    const ChainView& old_chain = r.final_views.at("hold");
    REQUIRE(new_chain.tip_height() >= fp);
    REQUIRE(old_chain.tip_height() >= fp);
    CHECK(new_chain.chain_digest(fp) == old_chain.chain_digest(fp));
    CHECK(new_chain.chain_digest(fp) == r.hard_fork.fork_point_digest);

    // Both chains kept growing after activation.
    CHECK(old_chain.tip_height() > fp + 3);
    CHECK(new_chain.tip_height() > fp + 3);
    // The new chain runs stable consensus and finalizes.
    CHECK(new_chain.finalized_height() > fp);

    // A redirect record landed on the new chain.
    bool redirect = false;
    for (uint64_t h = fp; h <= new_chain.tip_height(); ++h) {
        auto id = new_chain.tip_path_at(h);
        for (const Record& rec : new_chain.find(*id)->records)
            if (rec.kind == RecordKind::redirect) redirect = true;
    }
    CHECK(redirect);
}

TEST_CASE("hard fork: censoring dishonest majority keeps adoption below threshold") {
    // Dishonest producers exclude adoption signals; with a dishonest weight
    // majority the threshold is unreachable and the window expires.
    std::string j = R"({
        "name": "fork-censored",
        "horizon": 60,
        "consensus": {"kind": "unstable", "confirmation_depth": 3},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "x1", "weight": 2, "disposition": "dishonest", "strategy": "rewrite_attacker",
             "params": {"attack_start_round": 100000}},
            {"id": "x2", "weight": 2, "disposition": "dishonest", "strategy": "rewrite_attacker",
             "params": {"attack_start_round": 100000}}
        ],
        "shutdown": {"procedure": "hard_fork_to_stable", "trigger_round": 10,
                     "adoption_threshold": "2/3", "adoption_window": 25, "grace_rounds": 10}
    })";
    SimResult r = run(parse_scenario(j), 5);
    CHECK(r.hard_fork.state == HardForkOutcome::State::failed);
    CHECK(find_step(r, ShutdownCode::fork_failed) != nullptr);
    CHECK(find_step(r, ShutdownCode::fork_activated) == nullptr);
    for (const auto& [id, c] : r.node_chain) CHECK(c == 0);
}

TEST_CASE("freeze rule: isolation plus freezing yields a permanent split") {
    std::string j = R"({
        "name": "freeze-split",
        "horizon": 60,
        "consensus": {"kind": "unstable", "confirmation_depth": 3},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "sup", "weight": 2, "disposition": "dishonest", "strategy": "suppressor",
             "params": {"victims": ["h2"], "attack_start_round": 0}}
        ],
        "shutdown": {"freeze_depth": 3}
    })";
    SimResult r = run(parse_scenario(j), 0);

    CHECK(count_violations(r, ViolationCode::permanent_split) >= 1);

    // Two node subsets hold incompatible frozen prefixes at the horizon.
    const ChainView& a = r.final_views.at("h1");
    const ChainView& b = r.final_views.at("h2");
    REQUIRE(a.frozen_height() > 0);
    REQUIRE(b.frozen_height() > 0);
    uint64_t m = std::min(a.frozen_height(), b.frozen_height());
    REQUIRE(m >= 1);
    CHECK(*a.tip_path_at(m) != *b.tip_path_at(m));
}

TEST_CASE("abandonment with archives: rewrite succeeds, verdict unstable but cheap") {
    std::string j = R"({
        "name": "abandon",
        "horizon": 120,
        "consensus": {"kind": "unstable", "confirmation_depth": 6},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h3", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "zz", "weight": 1, "disposition": "dishonest", "strategy": "rewrite_attacker",
             "params": {"attack_start_round": 5, "target_height": 1}}
        ],
        "shutdown": {"procedure": "abandon_and_archive", "trigger_round": 15, "grace_rounds": 10}
    })";
    SimResult r = run(parse_scenario(j), 6);

    // Archives and commitments at T, then departure.
    CHECK(!r.archives.empty());
    CHECK(!r.bulletin.entries.empty());
    for (const std::string& id : {"h1", "h2", "h3"}) CHECK(r.active_at_horizon.count(id) == 0);
    CHECK(r.active_at_horizon.count("zz") == 1);

    // The attacker rewrote history out from under the naive verifier.
    CHECK(!r.verdict.stable);
    CHECK(r.verdict.cheap);
    CHECK(r.verdict.records_mismatched > 0);
}

TEST_CASE("permanent engagement: stable but never cheap, cost strictly increasing") {
    std::string j = R"({
        "name": "engaged",
        "horizon": 90,
        "consensus": {"kind": "unstable", "confirmation_depth": 6},
        "universe": [
            {"id": "h1", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h2", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "h3", "weight": 1, "disposition": "honest", "strategy": "honest_default"},
            {"id": "zz", "weight": 1, "disposition": "dishonest", "strategy": "rewrite_attacker",
             "params": {"attack_start_round": 30, "target_height": 1}}
        ],
        "shutdown": {"procedure": "none", "trigger_round": 40, "grace_rounds": 10}
    })";
    SimResult r = run(parse_scenario(j), 7);
    CHECK(r.verdict.stable);
    CHECK(!r.verdict.cheap);
    CHECK(r.verdict.honest_cost_after > 0);
    // Strictly increasing cumulative honest cost after T.
    double prev = -1;
    for (const MetricsRow& row : r.metrics) {
        if (row.round <= 40) continue;
        if (prev >= 0) CHECK(row.honest_cost_cum > prev);
        prev = row.honest_cost_cum;
    }
}
