#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainsim/chain.hpp"
#include "chainsim/consensus.hpp"

namespace chainsim {

// An archivist's copy of a chain prefix. The digest equals the chain digest
// of the serialized prefix, so equal digests mean byte-identical snapshots.
struct Snapshot {
    std::string archivist;
    uint64_t taken_round = 0;
    uint64_t height = 0;
    std::vector<Block> blocks;  // heights 0..height inclusive
    Digest digest;

    std::vector<uint8_t> encode() const;
    static Snapshot decode(std::span<const uint8_t> bytes);

    void save(const std::string& path) const;
    static Snapshot load(const std::string& path);

    const Record* find_record(const std::string& record_id) const;
};

struct Commitment {
    Digest digest;
    uint64_t taken_round = 0;
    std::string publisher;
    uint64_t index = 0;
};

// The incorruptible public registry ("publish the hash somewhere everyone
// can see it"). Append-only; unreachability, not corruption, is the modeled
// failure.
struct Bulletin {
    std::vector<Commitment> entries;

    uint64_t append(const Digest& digest, uint64_t round, const std::string& publisher);
    bool contains(const Digest& digest) const;

    std::string to_json() const;
    static Bulletin from_json(const std::string& text);
    void save(const std::string& path) const;
    static Bulletin load(const std::string& path);
};

struct SettledHeightError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Snapshot of the view's tip-path prefix. Throws SettledHeightError if
// up_to_height reaches into the unsettled tail (tip-k unstable, finalized
// stable).
Snapshot snapshot_chain(const ChainView& view, uint64_t up_to_height, const std::string& archivist,
                        uint64_t round, const ConsensusRule& rule);

struct ConsistencyResult {
    bool ok = true;
    uint64_t first_failing_height = 0;
    std::string reason;
};

// Replays block validation over the prefix.
ConsistencyResult internal_consistency_check(const Snapshot& snapshot);

enum class SnapshotVerdict : uint8_t {
    authentic = 0,    // internally consistent and committed on the bulletin
    tampered = 1,     // fails consistency or stored digest mismatch
    uncommitted = 2,  // consistent but unprovenanced
};

const char* to_string(SnapshotVerdict v);

SnapshotVerdict verify_snapshot(const Snapshot& snapshot, const Bulletin& bulletin);

enum class ArchiveComparison : uint8_t {
    consistent = 0,
    divergent_resolvable = 1,
    divergent_unresolvable = 2,
};

const char* to_string(ArchiveComparison c);

// Groups snapshots into prefix-compatibility classes; a lone class is
// consistent, several classes resolve only when exactly one carries a
// bulletin commitment. Pass nullptr for a withheld bulletin.
ArchiveComparison compare_archives(const std::vector<Snapshot>& snapshots, const Bulletin* bulletin);

// What a live node serves to a fresh verifier: its tip-path chain plus the
// finality marks it holds.
struct ServedChain {
    std::string owner;
    std::vector<Block> blocks;  // genesis..tip
    uint64_t finalized_height = 0;

    static ServedChain from_view(const ChainView& view);
};

enum class ResolvePolicy : uint8_t {
    naive = 0,          // protocol-faithful newcomer: live views only
    archive_aware = 1,  // bulletin-authenticated archives first, live fallback
};

struct Resolution {
    bool resolved = false;
    std::vector<uint8_t> bytes;
    std::string source;  // "live" or "archive:<archivist>"
};

Resolution resolve_query(const std::string& record_id, const std::vector<ServedChain>& live,
                         const std::vector<Snapshot>& archives, const Bulletin& bulletin,
                         ResolvePolicy policy, bool bulletin_reachable = true);

// Longest valid chain over everything the live nodes serve, finality
// respected, digest tie-break (a newcomer has no arrival history).
ChainView merge_served(const std::vector<ServedChain>& live);

}  // namespace chainsim
