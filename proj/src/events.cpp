#include "chainsim/events.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace chainsim {

namespace {
constexpr char kLogMagic[8] = {'C', 'S', 'I', 'M', 'L', 'O', 'G', '1'};

void encode_digest(ByteWriter& w, const Digest& d) { w.raw(d.bytes); }

Digest decode_digest(ByteReader& r) {
    Digest d;
    auto raw = r.raw(32);
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}
}  // namespace

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::block_produced: return "block_produced";
        case EventKind::fork_published: return "fork_published";
        case EventKind::tip_changed: return "tip_changed";
        case EventKind::finalized: return "finalized";
        case EventKind::mode_changed: return "mode_changed";
        case EventKind::node_joined: return "node_joined";
        case EventKind::node_left: return "node_left";
        case EventKind::defection: return "defection";
        case EventKind::suppression: return "suppression";
        case EventKind::shutdown_step: return "shutdown_step";
        case EventKind::safety_violation: return "safety_violation";
        case EventKind::snapshot_taken: return "snapshot_taken";
        case EventKind::commitment_published: return "commitment_published";
    }
    return "?";
}

const char* to_string(ShutdownCode c) {
    switch (c) {
        case ShutdownCode::signaling_started: return "signaling_started";
        case ShutdownCode::final_block_placed: return "final_block_placed";
        case ShutdownCode::final_block_settled: return "final_block_settled";
        case ShutdownCode::final_block_displaced: return "final_block_displaced";
        case ShutdownCode::depart_directive: return "depart_directive";
        case ShutdownCode::fork_activated: return "fork_activated";
        case ShutdownCode::fork_failed: return "fork_failed";
        case ShutdownCode::node_adopted: return "node_adopted";
        case ShutdownCode::archive_directive: return "archive_directive";
    }
    return "?";
}

const char* to_string(ViolationCode c) {
    switch (c) {
        case ViolationCode::conflicting_finalization: return "conflicting_finalization";
        case ViolationCode::freeze_conflict: return "freeze_conflict";
        case ViolationCode::permanent_split: return "permanent_split";
        case ViolationCode::finality_regression: return "finality_regression";
    }
    return "?";
}

EventLog::EventLog(const Scenario& scenario, uint64_t seed) : scenario_(scenario), seed_(seed) {}

void EventLog::push(uint64_t round, EventPayload payload) {
    if (round != seq_round_) {
        seq_round_ = round;
        next_seq_ = 0;
    }
    events_.push_back(SimEvent{round, next_seq_++, std::move(payload)});
}

namespace {

struct PayloadEncoder {
    ByteWriter& w;

    void operator()(const EvBlockProduced& e) {
        w.u8(e.chain);
        w.str(e.producer);
        e.block.encode(w);
        w.u8(e.broadcast ? 1 : 0);
    }
    void operator()(const EvForkPublished& e) {
        w.u8(e.chain);
        w.str(e.publisher);
        w.u64(e.fork_height);
        w.u32(e.block_count);
    }
    void operator()(const EvTipChanged& e) {
        w.u8(e.chain);
        w.str(e.node);
        encode_digest(w, e.tip);
        w.u64(e.height);
    }
    void operator()(const EvFinalized& e) {
        w.u8(e.chain);
        encode_digest(w, e.block_id);
        w.u64(e.height);
        w.f64(e.approving_weight);
        w.u32(static_cast<uint32_t>(e.approvers.size()));
        for (const auto& a : e.approvers) w.str(a);
    }
    void operator()(const EvModeChanged& e) {
        w.u8(e.mode);
        w.f64(e.margin);
    }
    void operator()(const EvNodeJoined& e) {
        w.str(e.node);
        w.f64(e.weight);
        w.u8(e.disposition);
    }
    void operator()(const EvNodeLeft& e) {
        w.str(e.node);
        w.str(e.reason);
    }
    void operator()(const EvDefection& e) {
        w.str(e.node);
        w.f64(e.own_weight);
        w.f64(e.active_weight);
    }
    void operator()(const EvSuppression& e) {
        w.str(e.suppressor);
        w.str(e.sender);
        w.str(e.receiver);
    }
    void operator()(const EvShutdownStep& e) {
        w.u8(static_cast<uint8_t>(e.code));
        w.str(e.node);
        w.u64(e.height);
        encode_digest(w, e.digest);
        w.str(e.detail);
    }
    void operator()(const EvSafetyViolation& e) {
        w.u8(static_cast<uint8_t>(e.code));
        w.str(e.node_a);
        w.str(e.node_b);
        w.u64(e.height);
        w.str(e.detail);
    }
    void operator()(const EvSnapshotTaken& e) {
        w.str(e.archivist);
        w.u8(e.chain);
        w.u64(e.height);
        encode_digest(w, e.digest);
    }
    void operator()(const EvCommitmentPublished& e) {
        encode_digest(w, e.digest);
        w.str(e.publisher);
        w.u64(e.taken_round);
        w.u64(e.bulletin_index);
    }
};

EventPayload decode_payload(EventKind kind, ByteReader& r) {
    switch (kind) {
        case EventKind::block_produced: {
            EvBlockProduced e;
            e.chain = r.u8();
            e.producer = r.str();
            e.block = Block::decode(r);
            e.broadcast = r.u8() != 0;
            return e;
        }
        case EventKind::fork_published: {
            EvForkPublished e;
            e.chain = r.u8();
            e.publisher = r.str();
            e.fork_height = r.u64();
            e.block_count = r.u32();
            return e;
        }
        case EventKind::tip_changed: {
            EvTipChanged e;
            e.chain = r.u8();
            e.node = r.str();
            e.tip = decode_digest(r);
            e.height = r.u64();
            return e;
        }
        case EventKind::finalized: {
            EvFinalized e;
            e.chain = r.u8();
            e.block_id = decode_digest(r);
            e.height = r.u64();
            e.approving_weight = r.f64();
            uint32_t n = r.u32();
            for (uint32_t i = 0; i < n; ++i) e.approvers.push_back(r.str());
            return e;
        }
        case EventKind::mode_changed: {
            EvModeChanged e;
            e.mode = r.u8();
            e.margin = r.f64();
            return e;
        }
        case EventKind::node_joined: {
            EvNodeJoined e;
            e.node = r.str();
            e.weight = r.f64();
            e.disposition = r.u8();
            return e;
        }
        case EventKind::node_left: {
            EvNodeLeft e;
            e.node = r.str();
            e.reason = r.str();
            return e;
        }
        case EventKind::defection: {
            EvDefection e;
            e.node = r.str();
            e.own_weight = r.f64();
            e.active_weight = r.f64();
            return e;
        }
        case EventKind::suppression: {
            EvSuppression e;
            e.suppressor = r.str();
            e.sender = r.str();
            e.receiver = r.str();
            return e;
        }
        case EventKind::shutdown_step: {
            EvShutdownStep e;
            e.code = static_cast<ShutdownCode>(r.u8());
            e.node = r.str();
            e.height = r.u64();
            e.digest = decode_digest(r);
            e.detail = r.str();
            return e;
        }
        case EventKind::safety_violation: {
            EvSafetyViolation e;
            e.code = static_cast<ViolationCode>(r.u8());
            e.node_a = r.str();
            e.node_b = r.str();
            e.height = r.u64();
            e.detail = r.str();
            return e;
        }
        case EventKind::snapshot_taken: {
            EvSnapshotTaken e;
            e.archivist = r.str();
            e.chain = r.u8();
            e.height = r.u64();
            e.digest = decode_digest(r);
            return e;
        }
        case EventKind::commitment_published: {
            EvCommitmentPublished e;
            e.digest = decode_digest(r);
            e.publisher = r.str();
            e.taken_round = r.u64();
            e.bulletin_index = r.u64();
            return e;
        }
    }
    throw std::runtime_error("event log: unknown event kind");
}

}  // namespace

std::vector<uint8_t> EventLog::serialize() const {
    ByteWriter w;
    w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kLogMagic), 8));
    scenario_.encode(w);
    w.u64(seed_);
    w.u32(static_cast<uint32_t>(events_.size()));
    for (const SimEvent& e : events_) {
        w.u64(e.round);
        w.u32(e.seq);
        w.u8(static_cast<uint8_t>(e.kind()));
        std::visit(PayloadEncoder{w}, e.payload);
    }
    Digest d = sha256(w.bytes());
    w.raw(d.bytes);
    return w.take();
}

Digest EventLog::digest() const {
    auto bytes = serialize();
    Digest d;
    std::copy(bytes.end() - 32, bytes.end(), d.bytes.begin());
    return d;
}

EventLog EventLog::deserialize(std::span<const uint8_t> bytes) {
    if (bytes.size() < 44) throw std::runtime_error("event log: truncated");
    Digest stored;
    std::copy(bytes.end() - 32, bytes.end(), stored.bytes.begin());
    auto body = bytes.subspan(0, bytes.size() - 32);
    if (sha256(body) != stored) throw std::runtime_error("event log: digest mismatch");

    ByteReader r(body);
    auto magic = r.raw(8);
    if (std::memcmp(magic.data(), kLogMagic, 8) != 0) throw std::runtime_error("event log: bad magic");
    EventLog log;
    log.scenario_ = Scenario::decode(r);
    log.seed_ = r.u64();
    uint32_t n = r.u32();
    log.events_.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        SimEvent e;
        e.round = r.u64();
        e.seq = r.u32();
        EventKind kind = static_cast<EventKind>(r.u8());
        e.payload = decode_payload(kind, r);
        log.events_.push_back(std::move(e));
    }
    return log;
}

void EventLog::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    auto bytes = serialize();
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EventLog EventLog::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

namespace {

struct JsonRenderer {
    nlohmann::json& j;

    void operator()(const EvBlockProduced& e) {
        j["chain"] = e.chain;
        j["producer"] = e.producer;
        j["block_id"] = e.block.id.hex();
        j["height"] = e.block.height;
        j["records"] = e.block.records.size();
        j["final"] = e.block.marker == BlockMarker::final;
        j["broadcast"] = e.broadcast;
    }
    void operator()(const EvForkPublished& e) {
        j["chain"] = e.chain;
        j["publisher"] = e.publisher;
        j["fork_height"] = e.fork_height;
        j["blocks"] = e.block_count;
    }
    void operator()(const EvTipChanged& e) {
        j["chain"] = e.chain;
        j["node"] = e.node;
        j["tip"] = e.tip.hex();
        j["height"] = e.height;
    }
    void operator()(const EvFinalized& e) {
        j["chain"] = e.chain;
        j["block_id"] = e.block_id.hex();
        j["height"] = e.height;
        j["approving_weight"] = e.approving_weight;
        j["approvers"] = e.approvers;
    }
    void operator()(const EvModeChanged& e) {
        j["mode"] = e.mode == 0 ? "honest" : "dishonest";
        j["margin"] = e.margin;
    }
    void operator()(const EvNodeJoined& e) {
        j["node"] = e.node;
        j["weight"] = e.weight;
        j["disposition"] = e.disposition == 0 ? "honest" : "dishonest";
    }
    void operator()(const EvNodeLeft& e) {
        j["node"] = e.node;
        j["reason"] = e.reason;
    }
    void operator()(const EvDefection& e) {
        j["node"] = e.node;
        j["own_weight"] = e.own_weight;
        j["active_weight"] = e.active_weight;
    }
    void operator()(const EvSuppression& e) {
        j["suppressor"] = e.suppressor;
        j["sender"] = e.sender;
        j["receiver"] = e.receiver;
    }
    void operator()(const EvShutdownStep& e) {
        j["code"] = to_string(e.code);
        j["node"] = e.node;
        j["height"] = e.height;
        j["digest"] = e.digest.hex();
        j["detail"] = e.detail;
    }
    void operator()(const EvSafetyViolation& e) {
        j["code"] = to_string(e.code);
        j["node_a"] = e.node_a;
        j["node_b"] = e.node_b;
        j["height"] = e.height;
        j["detail"] = e.detail;
    }
    void operator()(const EvSnapshotTaken& e) {
        j["archivist"] = e.archivist;
        j["chain"] = e.chain;
        j["height"] = e.height;
        j["digest"] = e.digest.hex();
    }
    void operator()(const EvCommitmentPublished& e) {
        j["digest"] = e.digest.hex();
        j["publisher"] = e.publisher;
        j["taken_round"] = e.taken_round;
        j["bulletin_index"] = e.bulletin_index;
    }
};

}  // namespace

std::string SimEvent::to_json_line() const {
    nlohmann::json j;
    j["round"] = round;
    j["seq"] = seq;
    j["kind"] = to_string(kind());
    std::visit(JsonRenderer{j}, payload);
    return j.dump();
}

std::string EventLog::to_json_lines() const {
    std::ostringstream out;
    for (const SimEvent& e : events_) out << e.to_json_line() << "\n";
    return out.str();
}

}  // namespace chainsim
