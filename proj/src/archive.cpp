#include "chainsim/archive.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace chainsim {

namespace {
constexpr char kSnapshotMagic[8] = {'C', 'S', 'N', 'A', 'P', '0', '0', '1'};
}

std::vector<uint8_t> Snapshot::encode() const {
    ByteWriter w;
    w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kSnapshotMagic), 8));
    w.str(archivist);
    w.u64(taken_round);
    w.u64(height);
    w.raw(digest.bytes);
    w.u32(static_cast<uint32_t>(blocks.size()));
    for (const Block& b : blocks) b.encode(w);
    return w.take();
}

Snapshot Snapshot::decode(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.raw(8);
    if (std::memcmp(magic.data(), kSnapshotMagic, 8) != 0)
        throw std::runtime_error("snapshot: bad magic");
    Snapshot s;
    s.archivist = r.str();
    s.taken_round = r.u64();
    s.height = r.u64();
    auto d = r.raw(32);
    std::copy(d.begin(), d.end(), s.digest.bytes.begin());
    uint32_t n = r.u32();
    s.blocks.reserve(n);
    for (uint32_t i = 0; i < n; ++i) s.blocks.push_back(Block::decode(r));
    return s;
}

void Snapshot::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    auto bytes = encode();
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Snapshot Snapshot::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

const Record* Snapshot::find_record(const std::string& record_id) const {
    for (const Block& b : blocks)
        for (const Record& r : b.records)
            if (r.record_id == record_id) return &r;
    return nullptr;
}

uint64_t Bulletin::append(const Digest& digest, uint64_t round, const std::string& publisher) {
    Commitment c;
    c.digest = digest;
    c.taken_round = round;
    c.publisher = publisher;
    c.index = entries.size();
    entries.push_back(c);
    return c.index;
}

bool Bulletin::contains(const Digest& digest) const {
    for (const Commitment& c : entries)
        if (c.digest == digest) return true;
    return false;
}

std::string Bulletin::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const Commitment& c : entries) {
        arr.push_back({{"index", c.index},
                       {"digest", c.digest.hex()},
                       {"taken_round", c.taken_round},
                       {"publisher", c.publisher}});
    }
    return arr.dump(2);
}

Bulletin Bulletin::from_json(const std::string& text) {
    Bulletin b;
    nlohmann::json arr = nlohmann::json::parse(text);
    for (const auto& e : arr) {
        Commitment c;
        auto d = Digest::from_hex(e.at("digest").get<std::string>());
        if (!d) throw std::runtime_error("bulletin: bad digest hex");
        c.digest = *d;
        c.taken_round = e.at("taken_round").get<uint64_t>();
        c.publisher = e.at("publisher").get<std::string>();
        c.index = e.at("index").get<uint64_t>();
        b.entries.push_back(c);
    }
    return b;
}

void Bulletin::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << to_json() << "\n";
}

Bulletin Bulletin::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

Snapshot snapshot_chain(const ChainView& view, uint64_t up_to_height, const std::string& archivist,
                        uint64_t round, const ConsensusRule& rule) {
    uint64_t settled = settled_height(view, rule);
    if (up_to_height > settled)
        throw SettledHeightError("height " + std::to_string(up_to_height) +
                                 " exceeds settled height " + std::to_string(settled));
    Snapshot s;
    s.archivist = archivist;
    s.taken_round = round;
    s.height = up_to_height;
    s.blocks = view.tip_prefix(up_to_height);
    s.digest = view.chain_digest(up_to_height);
    return s;
}

ConsistencyResult internal_consistency_check(const Snapshot& snapshot) {
    auto fail = [](uint64_t h, std::string why) {
        return ConsistencyResult{false, h, std::move(why)};
    };
    if (snapshot.blocks.empty()) return fail(0, "empty snapshot");
    for (size_t i = 0; i < snapshot.blocks.size(); ++i) {
        const Block& b = snapshot.blocks[i];
        uint64_t h = static_cast<uint64_t>(i);
        if (b.height != h) return fail(h, "height mismatch");
        if (b.id != b.compute_id()) return fail(h, "digest mismatch");
        if (i == 0) {
            if (b.parent_id != genesis_parent()) return fail(0, "genesis parent not null");
        } else if (b.parent_id != snapshot.blocks[i - 1].id) {
            return fail(h, "parent link broken");
        }
        std::set<std::string_view> seen;
        for (const Record& r : b.records) {
            if (r.body.size() > kMaxRecordBody) return fail(h, "oversize record");
            if (!seen.insert(r.record_id).second) return fail(h, "duplicate record id");
        }
    }
    if (snapshot.blocks.size() != snapshot.height + 1) return fail(snapshot.height, "block count mismatch");
    return {};
}

const char* to_string(SnapshotVerdict v) {
    switch (v) {
        case SnapshotVerdict::authentic: return "authentic";
        case SnapshotVerdict::tampered: return "tampered";
        case SnapshotVerdict::uncommitted: return "uncommitted";
    }
    return "?";
}

SnapshotVerdict verify_snapshot(const Snapshot& snapshot, const Bulletin& bulletin) {
    if (!internal_consistency_check(snapshot).ok) return SnapshotVerdict::tampered;
    ByteWriter w;
    for (const Block& b : snapshot.blocks) b.encode(w);
    if (sha256(w.bytes()) != snapshot.digest) return SnapshotVerdict::tampered;
    return bulletin.contains(snapshot.digest) ? SnapshotVerdict::authentic
                                              : SnapshotVerdict::uncommitted;
}

const char* to_string(ArchiveComparison c) {
    switch (c) {
        case ArchiveComparison::consistent: return "consistent";
        case ArchiveComparison::divergent_resolvable: return "divergent_resolvable";
        case ArchiveComparison::divergent_unresolvable: return "divergent_unresolvable";
    }
    return "?";
}

ArchiveComparison compare_archives(const std::vector<Snapshot>& snapshots, const Bulletin* bulletin) {
    // Prefix-compatible iff the block ids agree at the shorter height (a
    // block id commits to its whole ancestry). The relation is not
    // transitive: a short prefix can sit below several divergent branches,
    // so versions are the maximal pairwise-compatible subsets.
    const size_t n = snapshots.size();
    if (n > 20) throw std::runtime_error("compare_archives: too many snapshots");
    auto compatible = [&](size_t i, size_t j) {
        const Snapshot& a = snapshots[i];
        const Snapshot& b = snapshots[j];
        uint64_t m = std::min(a.height, b.height);
        if (a.blocks.size() <= m || b.blocks.size() <= m) return false;
        return a.blocks[m].id == b.blocks[m].id;
    };
    std::vector<uint32_t> adj(n, 0);
    bool all_pairs = true;
    for (size_t i = 0; i < n; ++i) {
        adj[i] |= 1u << i;
        for (size_t j = i + 1; j < n; ++j) {
            if (compatible(i, j)) {
                adj[i] |= 1u << j;
                adj[j] |= 1u << i;
            } else {
                all_pairs = false;
            }
        }
    }
    if (all_pairs) return ArchiveComparison::consistent;

    size_t committed_versions = 0;
    for (uint32_t mask = 1; mask < (1u << n); ++mask) {
        bool clique = true;
        for (size_t i = 0; i < n && clique; ++i)
            if (mask & (1u << i))
                if ((adj[i] & mask) != mask) clique = false;
        if (!clique) continue;
        bool maximal = true;
        for (size_t k = 0; k < n && maximal; ++k)
            if (!(mask & (1u << k)) && (adj[k] & mask) == mask) maximal = false;
        if (!maximal) continue;
        bool has_commitment = false;
        for (size_t i = 0; i < n; ++i)
            if ((mask & (1u << i)) && bulletin && bulletin->contains(snapshots[i].digest))
                has_commitment = true;
        if (has_commitment) ++committed_versions;
    }
    return committed_versions == 1 ? ArchiveComparison::divergent_resolvable
                                   : ArchiveComparison::divergent_unresolvable;
}

ServedChain ServedChain::from_view(const ChainView& view) {
    ServedChain s;
    s.owner = view.owner();
    s.blocks = view.tip_prefix(view.tip_height());
    s.finalized_height = view.finalized_height();
    return s;
}

ChainView merge_served(const std::vector<ServedChain>& live) {
    ChainView merged("verifier", TieBreak::digest_only);
    for (const ServedChain& s : live) {
        for (const Block& b : s.blocks) {
            if (b.height == 0) continue;
            merged.accept(b);
        }
    }
    uint64_t best_final = 0;
    const ServedChain* src = nullptr;
    for (const ServedChain& s : live) {
        if (s.finalized_height > best_final && s.finalized_height < s.blocks.size()) {
            best_final = s.finalized_height;
            src = &s;
        }
    }
    if (src) merged.mark_finalized(src->blocks[best_final].id, best_final);
    return merged;
}

Resolution resolve_query(const std::string& record_id, const std::vector<ServedChain>& live,
                         const std::vector<Snapshot>& archives, const Bulletin& bulletin,
                         ResolvePolicy policy, bool bulletin_reachable) {
    if (policy == ResolvePolicy::archive_aware && bulletin_reachable) {
        const Snapshot* best = nullptr;
        for (const Snapshot& s : archives) {
            if (verify_snapshot(s, bulletin) != SnapshotVerdict::authentic) continue;
            if (!best || s.height > best->height ||
                (s.height == best->height && s.digest < best->digest))
                best = &s;
        }
        if (best) {
            if (const Record* r = best->find_record(record_id))
                return {true, r->body, "archive:" + best->archivist};
            // Not covered by the settled prefix; fall through to the live
            // network.
        }
    }
    ChainView merged = merge_served(live);
    auto where = merged.locate_record(record_id);
    if (!where) return {false, {}, ""};
    const Block* b = merged.find(where->first);
    for (const Record& r : b->records)
        if (r.record_id == record_id) return {true, r.body, "live"};
    return {false, {}, ""};
}

}  // namespace chainsim
