#include "chainsim/chain.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace chainsim {

Record Record::data_record(std::string id, std::string_view text) {
    Record r;
    r.record_id = std::move(id);
    r.kind = RecordKind::data;
    r.body.assign(text.begin(), text.end());
    return r;
}

std::vector<uint8_t> Block::encode_for_id() const {
    ByteWriter w;
    w.raw(parent_id.bytes);
    w.u64(height);
    w.str(producer);
    w.u64(round);
    w.u32(static_cast<uint32_t>(records.size()));
    for (const Record& r : records) {
        w.str(r.record_id);
        w.u8(static_cast<uint8_t>(r.kind));
        w.blob(r.body);
    }
    w.u8(static_cast<uint8_t>(marker));
    return w.take();
}

void Block::encode(ByteWriter& w) const {
    w.raw(id.bytes);
    auto rest = encode_for_id();
    w.raw(rest);
}

Block Block::decode(ByteReader& r) {
    Block b;
    auto id_bytes = r.raw(32);
    std::copy(id_bytes.begin(), id_bytes.end(), b.id.bytes.begin());
    auto parent = r.raw(32);
    std::copy(parent.begin(), parent.end(), b.parent_id.bytes.begin());
    b.height = r.u64();
    b.producer = r.str();
    b.round = r.u64();
    uint32_t n = r.u32();
    b.records.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        Record rec;
        rec.record_id = r.str();
        rec.kind = static_cast<RecordKind>(r.u8());
        rec.body = r.blob();
        b.records.push_back(std::move(rec));
    }
    b.marker = static_cast<BlockMarker>(r.u8());
    return b;
}

Block make_genesis() {
    Block g;
    g.parent_id = genesis_parent();
    g.height = 0;
    g.producer = "genesis";
    g.round = 0;
    g.marker = BlockMarker::normal;
    g.seal();
    return g;
}

const char* to_string(BlockValidity v) {
    switch (v) {
        case BlockValidity::ok: return "ok";
        case BlockValidity::unknown_parent: return "unknown-parent";
        case BlockValidity::bad_digest: return "bad-digest";
        case BlockValidity::bad_height: return "bad-height";
        case BlockValidity::oversize_record: return "oversize-record";
        case BlockValidity::duplicate_record: return "duplicate-record";
    }
    return "?";
}

ChainView::ChainView(std::string owner, TieBreak rule) : owner_(std::move(owner)), rule_(rule) {
    Block g = make_genesis();
    genesis_id_ = g.id;
    tip_ = g.id;
    finalized_tip_ = g.id;
    blocks_.emplace(g.id, Stored{std::move(g), next_arrival_++});
    arrival_.push_back(genesis_id_);
}

const Block* ChainView::find(const Digest& id) const {
    auto it = blocks_.find(id);
    return it == blocks_.end() ? nullptr : &it->second.block;
}

BlockValidity ChainView::validate(const Block& b) const {
    if (b.id != b.compute_id()) return BlockValidity::bad_digest;
    std::set<std::string_view> seen;
    for (const Record& r : b.records) {
        if (r.body.size() > kMaxRecordBody) return BlockValidity::oversize_record;
        if (!seen.insert(r.record_id).second) return BlockValidity::duplicate_record;
    }
    if (b.parent_id == genesis_parent()) {
        if (b.height != 0) return BlockValidity::bad_height;
        return BlockValidity::ok;
    }
    const Block* parent = find(b.parent_id);
    if (!parent) return BlockValidity::unknown_parent;
    if (b.height != parent->height + 1) return BlockValidity::bad_height;
    return BlockValidity::ok;
}

BlockValidity ChainView::accept(const Block& b) {
    BlockValidity v = validate(b);
    if (v == BlockValidity::ok) {
        insert(b);
        drain_orphans();
        return v;
    }
    if (v == BlockValidity::unknown_parent) {
        if (orphans_.size() >= kOrphanBufferCap) orphans_.pop_front();
        orphans_.push_back(b);
    }
    return v;
}

void ChainView::insert(const Block& b) {
    if (blocks_.count(b.id)) return;
    blocks_.emplace(b.id, Stored{b, next_arrival_++});
    arrival_.push_back(b.id);
    // Incremental tip update; constraints only change in mark_finalized /
    // apply_freeze_rule, which do the full scan.
    if (violates_prefix(b.id)) return;
    const Block& t = *find(tip_);
    if (b.height > t.height) {
        tip_ = b.id;
    } else if (b.height == t.height && rule_ == TieBreak::digest_only && b.id < t.id) {
        tip_ = b.id;
    }
}

void ChainView::drain_orphans() {
    bool progress = true;
    while (progress) {
        progress = false;
        for (auto it = orphans_.begin(); it != orphans_.end(); ++it) {
            if (validate(*it) == BlockValidity::ok) {
                Block b = *it;
                orphans_.erase(it);
                insert(b);
                progress = true;
                break;
            }
        }
    }
}

Digest ChainView::fork_choice() const {
    const Stored* best = nullptr;
    for (const Digest& id : arrival_) {
        const Stored& s = blocks_.at(id);
        if (violates_prefix(id)) continue;
        if (!best) {
            best = &s;
            continue;
        }
        if (s.block.height > best->block.height) {
            best = &s;
        } else if (s.block.height == best->block.height) {
            if (rule_ == TieBreak::first_seen_then_digest) {
                if (s.arrival < best->arrival ||
                    (s.arrival == best->arrival && s.block.id < best->block.id))
                    best = &s;
            } else {
                if (s.block.id < best->block.id) best = &s;
            }
        }
    }
    // The current tip never violates its own prefixes, so best is always set.
    return best->block.id;
}

std::optional<Digest> ChainView::ancestor_at(const Digest& id, uint64_t height) const {
    const Block* b = find(id);
    while (b) {
        if (b->height == height) return b->id;
        if (b->height < height) return std::nullopt;
        b = find(b->parent_id);
    }
    return std::nullopt;
}

std::optional<Digest> ChainView::tip_path_at(uint64_t height) const {
    return ancestor_at(tip_, height);
}

bool ChainView::on_tip_path(const Digest& id) const {
    const Block* b = find(id);
    if (!b) return false;
    auto at = tip_path_at(b->height);
    return at && *at == id;
}

bool ChainView::violates_prefix(const Digest& candidate) const {
    const Block* b = find(candidate);
    if (!b) return true;
    if (finalized_height_ > 0 || frozen_height_ > 0) {
        uint64_t guard = std::max(finalized_height_, frozen_height_);
        if (b->height < guard) return true;
    }
    if (finalized_height_ > 0) {
        auto anc = ancestor_at(candidate, finalized_height_);
        auto want = ancestor_at(finalized_tip_, finalized_height_);
        if (!anc || !want || *anc != *want) return true;
    }
    if (frozen_height_ > 0) {
        auto anc = ancestor_at(candidate, frozen_height_);
        auto want = ancestor_at(tip_, frozen_height_);
        if (!anc || !want || *anc != *want) return true;
    }
    return false;
}

Digest ChainView::chain_digest(uint64_t up_to_height) const {
    if (up_to_height > tip_height()) throw std::out_of_range("chain_digest: height out of range");
    ByteWriter w;
    for (const Block& b : tip_prefix(up_to_height)) b.encode(w);
    return sha256(w.bytes());
}

std::vector<Block> ChainView::tip_prefix(uint64_t up_to_height) const {
    if (up_to_height > tip_height()) throw std::out_of_range("tip_prefix: height out of range");
    std::vector<Block> out;
    auto id = tip_path_at(up_to_height);
    const Block* b = find(*id);
    while (b) {
        out.push_back(*b);
        if (b->height == 0) break;
        b = find(b->parent_id);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::optional<std::pair<Digest, uint64_t>> ChainView::locate_record(const std::string& record_id) const {
    const Block* b = find(tip_);
    while (b) {
        for (const Record& r : b->records) {
            if (r.record_id == record_id) return std::make_pair(b->id, b->height);
        }
        if (b->height == 0) break;
        b = find(b->parent_id);
    }
    return std::nullopt;
}

void ChainView::mark_finalized(const Digest& id, uint64_t height) {
    const Block* b = find(id);
    if (!b || b->height != height) return;
    if (height <= finalized_height_ && finalized_height_ > 0) return;
    finalized_height_ = height;
    finalized_tip_ = id;
    tip_ = fork_choice();
}

uint64_t ChainView::apply_freeze_rule(uint64_t depth) {
    uint64_t th = tip_height();
    if (th >= depth) {
        uint64_t target = th - depth;
        if (target > frozen_height_) {
            frozen_height_ = target;
            tip_ = fork_choice();
        }
    }
    return frozen_height_;
}

std::optional<Digest> ChainView::frozen_block_at(uint64_t height) const {
    if (height > frozen_height_) return std::nullopt;
    return tip_path_at(height);
}

ChainView merge_views(const std::vector<const ChainView*>& views) {
    ChainView merged("merged", TieBreak::digest_only);
    for (const ChainView* v : views) {
        for (const Digest& id : v->block_ids()) {
            const Block* b = v->find(id);
            if (b->height == 0) continue;
            merged.accept(*b);
        }
    }
    uint64_t best_final = 0;
    const ChainView* final_src = nullptr;
    for (const ChainView* v : views) {
        if (v->finalized_height() > best_final) {
            best_final = v->finalized_height();
            final_src = v;
        }
    }
    if (final_src) {
        auto id = final_src->tip_path_at(best_final);
        if (id) merged.mark_finalized(*id, best_final);
    }
    return merged;
}

}  // namespace chainsim
