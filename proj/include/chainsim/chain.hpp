#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chainsim/bytes.hpp"
#include "chainsim/digest.hpp"

namespace chainsim {

constexpr size_t kMaxRecordBody = 1024;
constexpr size_t kOrphanBufferCap = 64;

enum class RecordKind : uint8_t {
    data = 0,
    adoption_signal = 1,
    redirect = 2,
    final_marker_payload = 3,
};

enum class BlockMarker : uint8_t {
    normal = 0,
    final = 1,
};

struct Record {
    std::string record_id;
    RecordKind kind = RecordKind::data;
    std::vector<uint8_t> body;

    bool operator==(const Record&) const = default;

    static Record data_record(std::string id, std::string_view text);
};

struct Block {
    Digest id;            // sha256 of the canonical encoding below it
    Digest parent_id;     // genesis_parent() for the genesis block
    uint64_t height = 0;
    std::string producer;
    uint64_t round = 0;
    std::vector<Record> records;
    BlockMarker marker = BlockMarker::normal;

    // Everything except id, in declaration order. The id is
    // sha256(encode_for_id()).
    std::vector<uint8_t> encode_for_id() const;
    // Full canonical block: id followed by encode_for_id(). Used by chain
    // digests, snapshots and the event log.
    void encode(ByteWriter& w) const;
    static Block decode(ByteReader& r);

    Digest compute_id() const { return sha256(encode_for_id()); }
    void seal() { id = compute_id(); }
};

Block make_genesis();

enum class BlockValidity : uint8_t {
    ok = 0,
    unknown_parent = 1,  // orphan; caller may buffer
    bad_digest = 2,
    bad_height = 3,
    oversize_record = 4,
    duplicate_record = 5,
};

const char* to_string(BlockValidity v);

enum class TieBreak : uint8_t {
    first_seen_then_digest = 0,
    digest_only = 1,  // what a newcomer with no arrival history uses
};

// One node's local copy of the chain: a block set plus the tip chosen by
// fork choice. Arrival order is tracked for first-seen tie-breaking;
// finalized/frozen prefixes constrain which branches fork choice may pick.
class ChainView {
public:
    ChainView() = default;
    explicit ChainView(std::string owner, TieBreak rule = TieBreak::first_seen_then_digest);

    const std::string& owner() const { return owner_; }

    BlockValidity validate(const Block& b) const;

    // Validates and inserts. ok/duplicate-insert → tip recomputed.
    // unknown_parent → buffered in the orphan FIFO (capacity 64) and
    // retried when the parent arrives.
    BlockValidity accept(const Block& b);

    bool contains(const Digest& id) const { return blocks_.count(id) > 0; }
    const Block* find(const Digest& id) const;
    const Block& genesis() const { return *find(genesis_id_); }

    const Digest& tip() const { return tip_; }
    uint64_t tip_height() const { return find(tip_)->height; }

    // Maximal-height block whose branch keeps the finalized and frozen
    // prefixes; ties by arrival order then smallest digest (or digest only,
    // per the view's rule).
    Digest fork_choice() const;

    // Ancestor of `id` at `height` (follows parent links).
    std::optional<Digest> ancestor_at(const Digest& id, uint64_t height) const;
    // Block id at `height` on the current tip path.
    std::optional<Digest> tip_path_at(uint64_t height) const;
    bool on_tip_path(const Digest& id) const;

    // sha256 over the canonical encodings of blocks 0..up_to_height on the
    // tip path. Throws std::out_of_range if up_to_height > tip height.
    Digest chain_digest(uint64_t up_to_height) const;
    std::vector<Block> tip_prefix(uint64_t up_to_height) const;

    // Position on the tip path, or nullopt. Losing branches not searched.
    std::optional<std::pair<Digest, uint64_t>> locate_record(const std::string& record_id) const;

    // Stable consensus bookkeeping. mark_finalized refuses regressions.
    uint64_t finalized_height() const { return finalized_height_; }
    void mark_finalized(const Digest& id, uint64_t height);

    // Irreversibility rule: advance the frozen prefix to depth `d` below the
    // current tip. Returns the new frozen height.
    uint64_t apply_freeze_rule(uint64_t depth);
    uint64_t frozen_height() const { return frozen_height_; }
    std::optional<Digest> frozen_block_at(uint64_t height) const;

    // True if choosing `candidate` as tip would abandon the finalized or
    // frozen prefix.
    bool violates_prefix(const Digest& candidate) const;

    size_t block_count() const { return blocks_.size(); }
    size_t orphan_count() const { return orphans_.size(); }

    // All block ids, in arrival order.
    std::vector<Digest> block_ids() const { return arrival_; }

private:
    struct Stored {
        Block block;
        uint64_t arrival = 0;
    };

    void insert(const Block& b);
    void drain_orphans();

    std::string owner_;
    TieBreak rule_ = TieBreak::first_seen_then_digest;
    std::unordered_map<Digest, Stored, DigestHash> blocks_;
    std::vector<Digest> arrival_;
    std::deque<Block> orphans_;
    Digest genesis_id_;
    Digest tip_;
    uint64_t finalized_height_ = 0;
    Digest finalized_tip_;  // highest finalized block id
    uint64_t frozen_height_ = 0;
    uint64_t next_arrival_ = 0;
};

// Fork choice for an outside observer over several views: merges every block
// and finalization mark, then picks a tip by digest tie-break (a newcomer has
// no arrival history).
ChainView merge_views(const std::vector<const ChainView*>& views);

}  // namespace chainsim
