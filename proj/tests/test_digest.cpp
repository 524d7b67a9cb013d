#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "chainsim/bytes.hpp"
#include "chainsim/digest.hpp"

using namespace chainsim;

namespace {
std::vector<uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }
}

TEST_CASE("sha256 matches the NIST vectors") {
    // FIPS 180-2 test vectors pin the digest contract independently of the
    // backing library.
    CHECK(sha256(bytes_of("abc")).hex() ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256(bytes_of("")).hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256(bytes_of("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")).hex() ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("digest hex round trip") {
    Digest d = sha256(bytes_of("roundtrip"));
    auto back = Digest::from_hex(d.hex());
    REQUIRE(back.has_value());
    CHECK(*back == d);
    CHECK(!Digest::from_hex("xyz").has_value());
    CHECK(!Digest::from_hex(std::string(63, 'a')).has_value());
}

TEST_CASE("byte writer and reader invert each other") {
    ByteWriter w;
    w.u8(7);
    w.u32(0xdeadbeef);
    w.u64(0x0123456789abcdefull);
    w.i64(-42);
    w.f64(3.5);
    w.str("hello");
    w.blob(bytes_of("\x00\x01\x02"));

    ByteReader r(w.bytes());
    CHECK(r.u8() == 7);
    CHECK(r.u32() == 0xdeadbeef);
    CHECK(r.u64() == 0x0123456789abcdefull);
    CHECK(r.i64() == -42);
    CHECK(r.f64() == 3.5);
    CHECK(r.str() == "hello");
    CHECK(r.blob() == bytes_of("\x00\x01\x02"));
    CHECK(r.done());
}

TEST_CASE("reader rejects truncation") {
    ByteWriter w;
    w.u32(123);
    ByteReader r(w.bytes());
    r.u8();
    CHECK_THROWS(r.u64());
}

TEST_CASE("little-endian layout is fixed") {
    ByteWriter w;
    w.u32(1);
    const auto& b = w.bytes();
    REQUIRE(b.size() == 4);
    CHECK(b[0] == 1);
    CHECK(b[3] == 0);
}
