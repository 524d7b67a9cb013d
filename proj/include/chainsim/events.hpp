#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "chainsim/chain.hpp"
#include "chainsim/consensus.hpp"
#include "chainsim/scenario.hpp"

namespace chainsim {

enum class EventKind : uint8_t {
    block_produced = 0,
    fork_published = 1,
    tip_changed = 2,
    finalized = 3,
    mode_changed = 4,
    node_joined = 5,
    node_left = 6,
    defection = 7,
    suppression = 8,
    shutdown_step = 9,
    safety_violation = 10,
    snapshot_taken = 11,
    commitment_published = 12,
};

const char* to_string(EventKind k);

enum class ShutdownCode : uint8_t {
    signaling_started = 0,
    final_block_placed = 1,
    final_block_settled = 2,
    final_block_displaced = 3,
    depart_directive = 4,
    fork_activated = 5,
    fork_failed = 6,
    node_adopted = 7,
    archive_directive = 8,
};

const char* to_string(ShutdownCode c);

enum class ViolationCode : uint8_t {
    conflicting_finalization = 0,
    freeze_conflict = 1,
    permanent_split = 2,
    finality_regression = 3,
};

const char* to_string(ViolationCode c);

struct EvBlockProduced {
    uint8_t chain = 0;
    std::string producer;
    Block block;
    bool broadcast = true;  // false for withheld (private-fork) blocks
};
struct EvForkPublished {
    uint8_t chain = 0;
    std::string publisher;
    uint64_t fork_height = 0;
    uint32_t block_count = 0;
};
struct EvTipChanged {
    uint8_t chain = 0;
    std::string node;
    Digest tip;
    uint64_t height = 0;
};
struct EvFinalized {
    uint8_t chain = 0;
    Digest block_id;
    uint64_t height = 0;
    double approving_weight = 0;
    std::vector<std::string> approvers;
};
struct EvModeChanged {
    uint8_t mode = 0;
    double margin = 0;
};
struct EvNodeJoined {
    std::string node;
    double weight = 0;
    uint8_t disposition = 0;
};
struct EvNodeLeft {
    std::string node;
    std::string reason;
};
struct EvDefection {
    std::string node;
    double own_weight = 0;
    double active_weight = 0;
};
struct EvSuppression {
    std::string suppressor;
    std::string sender;
    std::string receiver;
};
struct EvShutdownStep {
    ShutdownCode code = ShutdownCode::signaling_started;
    std::string node;
    uint64_t height = 0;
    Digest digest;
    std::string detail;
};
struct EvSafetyViolation {
    ViolationCode code = ViolationCode::conflicting_finalization;
    std::string node_a;
    std::string node_b;
    uint64_t height = 0;
    std::string detail;
};
struct EvSnapshotTaken {
    std::string archivist;
    uint8_t chain = 0;
    uint64_t height = 0;
    Digest digest;
};
struct EvCommitmentPublished {
    Digest digest;
    std::string publisher;
    uint64_t taken_round = 0;
    uint64_t bulletin_index = 0;
};

using EventPayload =
    std::variant<EvBlockProduced, EvForkPublished, EvTipChanged, EvFinalized, EvModeChanged,
                 EvNodeJoined, EvNodeLeft, EvDefection, EvSuppression, EvShutdownStep,
                 EvSafetyViolation, EvSnapshotTaken, EvCommitmentPublished>;

struct SimEvent {
    uint64_t round = 0;
    uint32_t seq = 0;  // intra-round order
    EventPayload payload;

    EventKind kind() const { return static_cast<EventKind>(payload.index()); }
    std::string to_json_line() const;
};

// Self-contained run record: the scenario and seed in the header, then the
// events, then a 32-byte SHA-256 trailer over header+events.
class EventLog {
public:
    EventLog() = default;
    EventLog(const Scenario& scenario, uint64_t seed);

    void push(uint64_t round, EventPayload payload);

    const std::vector<SimEvent>& events() const { return events_; }
    const Scenario& scenario() const { return scenario_; }
    uint64_t seed() const { return seed_; }

    std::vector<uint8_t> serialize() const;
    Digest digest() const;

    // Verifies the trailer digest.
    static EventLog deserialize(std::span<const uint8_t> bytes);

    void save(const std::string& path) const;
    static EventLog load(const std::string& path);
    std::string to_json_lines() const;

private:
    Scenario scenario_;
    uint64_t seed_ = 0;
    std::vector<SimEvent> events_;
    uint32_t next_seq_ = 0;
    uint64_t seq_round_ = 0;
};

}  // namespace chainsim
