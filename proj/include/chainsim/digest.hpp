#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace chainsim {

// 256-bit digest. Block ids, chain digests, snapshot commitments and the
// event-log digest are all SHA-256 over the canonical encoding in bytes.hpp.
struct Digest {
    std::array<uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    bool is_zero() const {
        for (uint8_t b : bytes)
            if (b != 0) return false;
        return true;
    }

    std::string hex() const;
    static std::optional<Digest> from_hex(std::string_view hex);
};

struct DigestHash {
    size_t operator()(const Digest& d) const {
        size_t h = 0;
        for (int i = 0; i < 8; ++i) h |= static_cast<size_t>(d.bytes[i]) << (8 * i);
        return h;
    }
};

Digest sha256(std::span<const uint8_t> data);

// Parent id of the genesis block.
inline Digest genesis_parent() { return Digest{}; }

}  // namespace chainsim
