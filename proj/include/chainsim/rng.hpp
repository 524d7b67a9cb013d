#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace chainsim {

// Counter-based splittable generator. A stream is keyed by the run seed plus
// a text tag ("election/0", "churn", ...); draw i of a stream is
// mix64(key + (i+1)*GOLDEN), the SplitMix64 sequence. Streams never interact,
// so adding a consumer with a fresh tag cannot perturb existing streams.
// Exact definition in docs/FORMATS.md; replays across implementations must
// reproduce the same values bit-for-bit.
class Rng {
public:
    Rng() = default;
    Rng(uint64_t seed, std::string_view tag);

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_unit();

    // Uniform integer in [0, n); n > 0. Single draw, bias negligible at
    // simulation scale (documented).
    uint64_t next_below(uint64_t n);

    uint64_t key() const { return key_; }
    uint64_t draws() const { return counter_; }

    static uint64_t mix64(uint64_t z);
    static uint64_t stream_key(uint64_t seed, std::string_view tag);

private:
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace chainsim
