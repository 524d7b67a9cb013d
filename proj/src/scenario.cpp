#include "chainsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

namespace chainsim {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) throw ScenarioError(path + "." + it.key(), "unknown key");
    }
}

double require_number(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw ScenarioError(path + "." + key, "missing");
    if (!obj[key].is_number()) throw ScenarioError(path + "." + key, "expected number");
    return obj[key].get<double>();
}

uint64_t require_round(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw ScenarioError(path + "." + key, "missing");
    if (!obj[key].is_number_integer() || obj[key].get<int64_t>() < 0)
        throw ScenarioError(path + "." + key, "expected non-negative integer");
    return obj[key].get<uint64_t>();
}

std::string require_string(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key) || !obj[key].is_string())
        throw ScenarioError(path + "." + key, "expected string");
    return obj[key].get<std::string>();
}

// Accepts "2/3" or {"num": 2, "den": 3}.
Rational parse_rational(const json& v, const std::string& path) {
    if (v.is_string()) {
        auto r = Rational::parse(v.get<std::string>());
        if (!r) throw ScenarioError(path, "expected \"num/den\"");
        return *r;
    }
    if (v.is_object()) {
        reject_unknown(v, {"num", "den"}, path);
        int64_t num = v.at("num").get<int64_t>();
        int64_t den = v.at("den").get<int64_t>();
        if (den <= 0) throw ScenarioError(path, "denominator must be positive");
        return Rational{num, den};
    }
    throw ScenarioError(path, "expected \"num/den\" string or {num, den}");
}

ConsensusRule parse_consensus(const json& obj) {
    const std::string path = "consensus";
    reject_unknown(obj, {"kind", "confirmation_depth", "quorum_fraction"}, path);
    ConsensusRule rule;
    std::string kind = require_string(obj, "kind", path);
    if (kind == "unstable") {
        rule.kind = ConsensusKind::unstable;
        if (obj.contains("quorum_fraction"))
            throw ScenarioError(path + ".quorum_fraction", "only valid for stable consensus");
        rule.confirmation_depth =
            obj.contains("confirmation_depth") ? require_round(obj, "confirmation_depth", path) : 6;
        if (rule.confirmation_depth == 0)
            throw ScenarioError(path + ".confirmation_depth", "must be positive");
    } else if (kind == "stable") {
        rule.kind = ConsensusKind::stable;
        if (obj.contains("confirmation_depth"))
            throw ScenarioError(path + ".confirmation_depth", "only valid for unstable consensus");
        rule.quorum_fraction = obj.contains("quorum_fraction")
                                   ? parse_rational(obj["quorum_fraction"], path + ".quorum_fraction")
                                   : Rational{2, 3};
        const Rational& q = rule.quorum_fraction;
        // q in (1/2, 1]
        if (!(2 * q.num > q.den && q.num <= q.den))
            throw ScenarioError(path + ".quorum_fraction", "must be in (1/2, 1]");
    } else {
        throw ScenarioError(path + ".kind", "expected \"unstable\" or \"stable\"");
    }
    return rule;
}

NodeSpec parse_node(const json& obj, size_t index) {
    const std::string path = "universe[" + std::to_string(index) + "]";
    reject_unknown(obj, {"id", "weight", "disposition", "strategy", "join_round", "leave_round", "params"},
                   path);
    NodeSpec n;
    n.id = require_string(obj, "id", path);
    if (n.id.empty()) throw ScenarioError(path + ".id", "empty id");
    n.weight = require_number(obj, "weight", path);
    if (!(n.weight > 0)) throw ScenarioError(path + ".weight", "must be positive");
    std::string disp = require_string(obj, "disposition", path);
    if (disp == "honest")
        n.disposition = Disposition::honest;
    else if (disp == "dishonest")
        n.disposition = Disposition::dishonest;
    else
        throw ScenarioError(path + ".disposition", "expected \"honest\" or \"dishonest\"");
    auto strat = strategy_from_string(require_string(obj, "strategy", path));
    if (!strat) throw ScenarioError(path + ".strategy", "unknown strategy");
    n.strategy = *strat;
    if (obj.contains("join_round")) n.join_round = require_round(obj, "join_round", path);
    if (obj.contains("leave_round")) n.leave_round = require_round(obj, "leave_round", path);
    if (n.join_round && n.leave_round && !(*n.join_round < *n.leave_round))
        throw ScenarioError(path + ".leave_round", "join_round must precede leave_round");

    json params = obj.contains("params") ? obj["params"] : json::object();
    if (!params.is_object()) throw ScenarioError(path + ".params", "expected object");
    reject_unknown(params,
                   {"fee_threshold", "defect_threshold", "attack_start_round", "attack_end_round",
                    "target_height", "victims", "adopt_hard_fork"},
                   path + ".params");

    auto forbid = [&](const char* key) {
        if (params.contains(key))
            throw ScenarioError(path + ".params." + key,
                                std::string("not a parameter of ") + to_string(n.strategy));
    };
    switch (n.strategy) {
        case StrategyKind::fee_waiter:
            n.params.fee_threshold = require_number(params, "fee_threshold", path + ".params");
            if (n.params.fee_threshold < 0)
                throw ScenarioError(path + ".params.fee_threshold", "must be non-negative");
            forbid("victims");
            forbid("attack_start_round");
            forbid("target_height");
            forbid("defect_threshold");
            break;
        case StrategyKind::defector:
            if (params.contains("defect_threshold"))
                n.params.defect_threshold = require_number(params, "defect_threshold", path + ".params");
            if (!(n.params.defect_threshold > 0 && n.params.defect_threshold <= 1))
                throw ScenarioError(path + ".params.defect_threshold", "must be in (0, 1]");
            if (params.contains("target_height"))
                n.params.target_height = static_cast<int64_t>(require_round(params, "target_height", path + ".params"));
            forbid("victims");
            forbid("fee_threshold");
            break;
        case StrategyKind::suppressor: {
            if (!params.contains("victims") || !params["victims"].is_array() ||
                params["victims"].empty())
                throw ScenarioError(path + ".params.victims",
                                    "suppressor node " + n.id + " requires a non-empty victim list");
            for (const auto& v : params["victims"]) {
                if (!v.is_string()) throw ScenarioError(path + ".params.victims", "expected string ids");
                n.params.victims.push_back(v.get<std::string>());
            }
            if (params.contains("attack_start_round"))
                n.params.attack_start_round =
                    static_cast<int64_t>(require_round(params, "attack_start_round", path + ".params"));
            if (params.contains("attack_end_round"))
                n.params.attack_end_round =
                    static_cast<int64_t>(require_round(params, "attack_end_round", path + ".params"));
            forbid("fee_threshold");
            forbid("target_height");
            break;
        }
        case StrategyKind::rewrite_attacker:
        case StrategyKind::late_dominator:
            if (params.contains("attack_start_round"))
                n.params.attack_start_round =
                    static_cast<int64_t>(require_round(params, "attack_start_round", path + ".params"));
            else if (n.strategy == StrategyKind::late_dominator)
                throw ScenarioError(path + ".params.attack_start_round",
                                    "late_dominator node " + n.id + " requires attack_start_round");
            if (params.contains("target_height"))
                n.params.target_height =
                    static_cast<int64_t>(require_round(params, "target_height", path + ".params"));
            forbid("victims");
            forbid("fee_threshold");
            break;
        case StrategyKind::honest_default:
            if (params.contains("adopt_hard_fork")) {
                if (!params["adopt_hard_fork"].is_boolean())
                    throw ScenarioError(path + ".params.adopt_hard_fork", "expected boolean");
                n.params.adopt_hard_fork = params["adopt_hard_fork"].get<bool>();
            }
            forbid("victims");
            forbid("fee_threshold");
            forbid("target_height");
            forbid("attack_start_round");
            break;
    }

    if (n.strategy == StrategyKind::late_dominator) {
        uint64_t start = static_cast<uint64_t>(n.params.attack_start_round);
        if (n.join_round && *n.join_round != start)
            throw ScenarioError(path + ".join_round",
                                "late_dominator joins at attack_start_round");
        n.join_round = start;
    }
    // Dishonest dispositions don't adopt.
    if (n.disposition == Disposition::dishonest) n.params.adopt_hard_fork = false;
    return n;
}

ChurnSchedule parse_churn(const json& obj) {
    const std::string path = "churn";
    reject_unknown(obj, {"phases"}, path);
    ChurnSchedule sched;
    if (!obj.contains("phases")) return sched;
    if (!obj["phases"].is_array()) throw ScenarioError(path + ".phases", "expected array");
    size_t i = 0;
    for (const auto& p : obj["phases"]) {
        std::string ppath = path + ".phases[" + std::to_string(i) + "]";
        reject_unknown(p, {"start_round", "end_round", "join_rate", "leave_rate"}, ppath);
        ChurnPhase phase;
        phase.start_round = require_round(p, "start_round", ppath);
        phase.end_round = require_round(p, "end_round", ppath);
        if (phase.end_round < phase.start_round)
            throw ScenarioError(ppath + ".end_round", "must be >= start_round");
        if (p.contains("join_rate")) phase.join_rate = require_number(p, "join_rate", ppath);
        if (p.contains("leave_rate")) phase.leave_rate = require_number(p, "leave_rate", ppath);
        if (phase.join_rate < 0 || phase.leave_rate < 0)
            throw ScenarioError(ppath, "rates must be non-negative");
        if (!sched.phases.empty() && phase.start_round <= sched.phases.back().end_round)
            throw ScenarioError(ppath + ".start_round", "phases must be ordered and non-overlapping");
        sched.phases.push_back(phase);
        ++i;
    }
    return sched;
}

ShutdownPlan parse_shutdown(const json& obj, uint64_t horizon, ConsensusKind kind) {
    const std::string path = "shutdown";
    reject_unknown(obj,
                   {"procedure", "trigger_round", "grace_rounds", "adoption_threshold",
                    "adoption_window", "freeze_depth", "cost_budget"},
                   path);
    ShutdownPlan plan;
    std::string proc = obj.contains("procedure") ? require_string(obj, "procedure", path) : "none";
    auto p = procedure_from_string(proc);
    if (!p) throw ScenarioError(path + ".procedure", "unknown procedure");
    plan.procedure = *p;
    if (obj.contains("trigger_round")) plan.trigger_round = require_round(obj, "trigger_round", path);
    if (plan.procedure != Procedure::none && !plan.trigger_round)
        throw ScenarioError(path + ".trigger_round", "required for procedure " + proc);
    if (obj.contains("grace_rounds")) plan.grace_rounds = require_round(obj, "grace_rounds", path);
    if (plan.trigger_round && *plan.trigger_round + plan.grace_rounds > horizon)
        throw ScenarioError(path + ".trigger_round", "trigger_round + grace_rounds exceeds horizon");

    bool is_fork = plan.procedure == Procedure::hard_fork_to_stable;
    if (obj.contains("adoption_threshold")) {
        if (!is_fork)
            throw ScenarioError(path + ".adoption_threshold", "only valid for hard_fork_to_stable");
        plan.adoption_threshold = parse_rational(obj["adoption_threshold"], path + ".adoption_threshold");
    }
    const Rational& a = plan.adoption_threshold;
    if (!(a.num > 0 && a.num <= a.den))
        throw ScenarioError(path + ".adoption_threshold", "must be in (0, 1]");
    if (obj.contains("adoption_window")) {
        if (!is_fork)
            throw ScenarioError(path + ".adoption_window", "only valid for hard_fork_to_stable");
        plan.adoption_window = require_round(obj, "adoption_window", path);
    }
    if (is_fork && kind != ConsensusKind::unstable)
        throw ScenarioError(path + ".procedure", "hard_fork_to_stable requires an unstable original rule");
    if (obj.contains("freeze_depth")) {
        plan.freeze_depth = require_round(obj, "freeze_depth", path);
        if (*plan.freeze_depth == 0) throw ScenarioError(path + ".freeze_depth", "must be positive");
    }
    if (obj.contains("cost_budget")) {
        plan.cost_budget = require_number(obj, "cost_budget", path);
        if (plan.cost_budget < 0) throw ScenarioError(path + ".cost_budget", "must be non-negative");
    }
    return plan;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ScenarioError("$", std::string("parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ScenarioError("$", "expected a JSON object");
    reject_unknown(doc,
                   {"name", "horizon", "consensus", "universe", "churn", "shutdown",
                    "fees_per_round", "analyzers", "bulletin_reachable", "outputs"},
                   "$");

    Scenario s;
    s.name = require_string(doc, "name", "$");
    s.horizon = require_round(doc, "horizon", "$");
    if (s.horizon == 0) throw ScenarioError("$.horizon", "must be positive");
    if (!doc.contains("consensus")) throw ScenarioError("$.consensus", "missing");
    s.consensus = parse_consensus(doc["consensus"]);

    if (!doc.contains("universe") || !doc["universe"].is_array() || doc["universe"].empty())
        throw ScenarioError("$.universe", "expected non-empty array");
    std::set<std::string> ids;
    size_t i = 0;
    for (const auto& nj : doc["universe"]) {
        NodeSpec n = parse_node(nj, i++);
        if (!ids.insert(n.id).second)
            throw ScenarioError("universe[" + std::to_string(i - 1) + "].id",
                                "duplicate id " + n.id);
        s.universe.nodes.push_back(std::move(n));
    }
    std::sort(s.universe.nodes.begin(), s.universe.nodes.end(),
              [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });

    // Cross checks: victims must exist.
    for (const NodeSpec& n : s.universe.nodes) {
        for (const std::string& v : n.params.victims) {
            if (!s.universe.find(v))
                throw ScenarioError("universe", "suppressor " + n.id + " lists unknown victim " + v);
        }
    }

    if (doc.contains("churn")) s.churn = parse_churn(doc["churn"]);
    s.shutdown = doc.contains("shutdown")
                     ? parse_shutdown(doc["shutdown"], s.horizon, s.consensus.kind)
                     : ShutdownPlan{};
    if (doc.contains("fees_per_round")) {
        s.fees_per_round = require_number(doc, "fees_per_round", "$");
        if (s.fees_per_round < 0) throw ScenarioError("$.fees_per_round", "must be non-negative");
    }
    if (doc.contains("analyzers")) {
        const json& a = doc["analyzers"];
        reject_unknown(a, {"safety_factor", "sample_every"}, "analyzers");
        if (a.contains("safety_factor")) {
            s.analyzers.safety_factor = require_number(a, "safety_factor", "analyzers");
            if (s.analyzers.safety_factor < 1)
                throw ScenarioError("analyzers.safety_factor", "must be >= 1");
        }
        if (a.contains("sample_every")) {
            s.analyzers.sample_every = require_round(a, "sample_every", "analyzers");
            if (s.analyzers.sample_every == 0)
                throw ScenarioError("analyzers.sample_every", "must be positive");
        }
    }
    if (doc.contains("bulletin_reachable")) {
        if (!doc["bulletin_reachable"].is_boolean())
            throw ScenarioError("$.bulletin_reachable", "expected boolean");
        s.bulletin_reachable = doc["bulletin_reachable"].get<bool>();
    }
    if (doc.contains("outputs")) {
        const json& o = doc["outputs"];
        reject_unknown(o, {"metrics", "events", "report"}, "outputs");
        if (o.contains("metrics")) s.outputs.metrics = require_string(o, "metrics", "outputs");
        if (o.contains("events")) s.outputs.events = require_string(o, "events", "outputs");
        if (o.contains("report")) s.outputs.report = require_string(o, "report", "outputs");
    }
    return s;
}

Scenario load_scenario(const std::string& file_path) {
    std::ifstream f(file_path);
    if (!f) throw ScenarioError("$", "cannot open " + file_path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_scenario(text);
}

void Scenario::encode(ByteWriter& w) const {
    w.str(name);
    w.u64(horizon);
    w.u8(static_cast<uint8_t>(consensus.kind));
    w.u64(consensus.confirmation_depth);
    w.i64(consensus.quorum_fraction.num);
    w.i64(consensus.quorum_fraction.den);
    w.u32(static_cast<uint32_t>(universe.nodes.size()));
    for (const NodeSpec& n : universe.nodes) {
        w.str(n.id);
        w.f64(n.weight);
        w.u8(static_cast<uint8_t>(n.disposition));
        w.u8(static_cast<uint8_t>(n.strategy));
        w.i64(n.join_round ? static_cast<int64_t>(*n.join_round) : -1);
        w.i64(n.leave_round ? static_cast<int64_t>(*n.leave_round) : -1);
        w.f64(n.params.fee_threshold);
        w.f64(n.params.defect_threshold);
        w.i64(n.params.attack_start_round);
        w.i64(n.params.attack_end_round);
        w.i64(n.params.target_height);
        w.u32(static_cast<uint32_t>(n.params.victims.size()));
        for (const std::string& v : n.params.victims) w.str(v);
        w.u8(n.params.adopt_hard_fork ? 1 : 0);
    }
    w.u32(static_cast<uint32_t>(churn.phases.size()));
    for (const ChurnPhase& p : churn.phases) {
        w.u64(p.start_round);
        w.u64(p.end_round);
        w.f64(p.join_rate);
        w.f64(p.leave_rate);
    }
    w.u8(static_cast<uint8_t>(shutdown.procedure));
    w.i64(shutdown.trigger_round ? static_cast<int64_t>(*shutdown.trigger_round) : -1);
    w.u64(shutdown.grace_rounds);
    w.i64(shutdown.adoption_threshold.num);
    w.i64(shutdown.adoption_threshold.den);
    w.u64(shutdown.adoption_window);
    w.i64(shutdown.freeze_depth ? static_cast<int64_t>(*shutdown.freeze_depth) : -1);
    w.f64(shutdown.cost_budget);
    w.f64(fees_per_round);
    w.f64(analyzers.safety_factor);
    w.u64(analyzers.sample_every);
    w.u8(bulletin_reachable ? 1 : 0);
}

Scenario Scenario::decode(ByteReader& r) {
    Scenario s;
    s.name = r.str();
    s.horizon = r.u64();
    s.consensus.kind = static_cast<ConsensusKind>(r.u8());
    s.consensus.confirmation_depth = r.u64();
    s.consensus.quorum_fraction.num = r.i64();
    s.consensus.quorum_fraction.den = r.i64();
    uint32_t n_nodes = r.u32();
    for (uint32_t i = 0; i < n_nodes; ++i) {
        NodeSpec n;
        n.id = r.str();
        n.weight = r.f64();
        n.disposition = static_cast<Disposition>(r.u8());
        n.strategy = static_cast<StrategyKind>(r.u8());
        int64_t jr = r.i64();
        if (jr >= 0) n.join_round = static_cast<uint64_t>(jr);
        int64_t lr = r.i64();
        if (lr >= 0) n.leave_round = static_cast<uint64_t>(lr);
        n.params.fee_threshold = r.f64();
        n.params.defect_threshold = r.f64();
        n.params.attack_start_round = r.i64();
        n.params.attack_end_round = r.i64();
        n.params.target_height = r.i64();
        uint32_t nv = r.u32();
        for (uint32_t j = 0; j < nv; ++j) n.params.victims.push_back(r.str());
        n.params.adopt_hard_fork = r.u8() != 0;
        s.universe.nodes.push_back(std::move(n));
    }
    uint32_t n_phases = r.u32();
    for (uint32_t i = 0; i < n_phases; ++i) {
        ChurnPhase p;
        p.start_round = r.u64();
        p.end_round = r.u64();
        p.join_rate = r.f64();
        p.leave_rate = r.f64();
        s.churn.phases.push_back(p);
    }
    s.shutdown.procedure = static_cast<Procedure>(r.u8());
    int64_t tr = r.i64();
    if (tr >= 0) s.shutdown.trigger_round = static_cast<uint64_t>(tr);
    s.shutdown.grace_rounds = r.u64();
    s.shutdown.adoption_threshold.num = r.i64();
    s.shutdown.adoption_threshold.den = r.i64();
    s.shutdown.adoption_window = r.u64();
    int64_t fd = r.i64();
    if (fd >= 0) s.shutdown.freeze_depth = static_cast<uint64_t>(fd);
    s.shutdown.cost_budget = r.f64();
    s.fees_per_round = r.f64();
    s.analyzers.safety_factor = r.f64();
    s.analyzers.sample_every = r.u64();
    s.bulletin_reachable = r.u8() != 0;
    return s;
}

}  // namespace chainsim
