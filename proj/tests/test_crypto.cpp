#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "v6covert/crypto.hpp"
#include "v6covert/error.hpp"
#include "v6covert/rng.hpp"

using namespace v6covert;
using namespace testsupport;

TEST_CASE("keystream for 0102030405") {
  Rc4State rc4(Bytes{1, 2, 3, 4, 5});
  const auto ks = rc4.apply(Bytes(16, 0));
  CHECK(to_hex(ks) == "b2396305f03dc027ccc3524a0a1118a8");
  CHECK(ks == rc4_oracle(Bytes{1, 2, 3, 4, 5}, Bytes(16, 0)));
}

TEST_CASE("Key / Plaintext") {
  Rc4State rc4(bytes_of("Key"));
  const auto ct = rc4.apply(bytes_of("Plaintext"));
  CHECK(to_hex(ct) == "bbf316e8d940af0ad3");
  CHECK(ct == rc4_oracle(bytes_of("Key"), bytes_of("Plaintext")));
}

TEST_CASE("matches the oracle on random keys") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Bytes key(1 + rng.below(256)), data(rng.below(300));
    for (auto& b : key) b = rng.byte();
    for (auto& b : data) b = rng.byte();
    Rc4State rc4(key);
    REQUIRE(rc4.apply(data) == rc4_oracle(key, data));
  }
}

TEST_CASE("s-box is a permutation after key setup") {
  Rc4State rc4(bytes_of("any key at all"));
  auto s = rc4.s_box();
  std::sort(s.begin(), s.end());
  std::array<std::uint8_t, 256> ident;
  std::iota(ident.begin(), ident.end(), 0);
  CHECK(s == ident);
}

TEST_CASE("empty input leaves state alone") {
  Rc4State a(bytes_of("k")), b(bytes_of("k"));
  CHECK(a.apply({}).empty());
  CHECK(a.s_box() == b.s_box());
  CHECK(a.i() == b.i());
  CHECK(a.j() == b.j());
}

TEST_CASE("xor involution and determinism") {
  const Bytes msg = bytes_of("This is a covert communication");
  Rc4State a(bytes_of("secret")), b(bytes_of("secret"));
  const Bytes ct = a.apply(msg);
  CHECK(ct != msg);
  CHECK(b.apply(ct) == msg);
  Rc4State c(bytes_of("secret")), d(bytes_of("secret"));
  for (int k = 0; k < 64; ++k) REQUIRE(c.next_byte() == d.next_byte());
}

TEST_CASE("key length limits") {
  CHECK_THROWS_AS(Rc4State(Bytes{}), Error);
  CHECK_THROWS_AS(Rc4State(Bytes(257, 1)), Error);
  CHECK_NOTHROW(Rc4State(Bytes(256, 1)));
}

TEST_CASE("ascii shift") {
  CHECK(ascii_shift(Bytes{0x41}, 13, ShiftDirection::forward) == Bytes{0x4E});
  CHECK(ascii_shift(Bytes{0xF8}, 13, ShiftDirection::forward) == Bytes{0x05});
  const Bytes m = bytes_of("shift me");
  CHECK(ascii_shift(m, 0, ShiftDirection::forward) == m);
  CHECK(ascii_shift(ascii_shift(m, 200, ShiftDirection::forward), 200, ShiftDirection::inverse) == m);
}

TEST_CASE("sequence positions") {
  const auto secret = SharedSecret::make(bytes_of("k"));
  CHECK(sequence_nibble(secret, 0) == 0xE);
  CHECK(sequence_nibble(secret, 2) == 0x7);
  CHECK(sequence_nibble(secret, 16) == sequence_nibble(secret, 0));
  CHECK(sequence_nibble(secret, 15) == 0x0);
  CHECK(sequence_position(secret, 0xA) == 1);
}

TEST_CASE("sequence parsing") {
  CHECK(parse_sequence("E,A,7,1,2,3,4,5,6,8,9,B,C,D,F,O") == kDefaultSequence);
  CHECK(parse_sequence("ea71234568 9bcdf0") == kDefaultSequence);
  CHECK_THROWS_AS(parse_sequence("EA71234568"), Error);
  CHECK_THROWS_AS(parse_sequence("EE71234568 9bcdf0"), Error);
}

TEST_CASE("secret validation") {
  NibbleSequence dup = kDefaultSequence;
  dup[1] = dup[0];
  try {
    SharedSecret::make(bytes_of("k"), dup);
    FAIL("duplicate nibble accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_secret);
  }
  CHECK(is_nibble_permutation(kDefaultSequence));
  CHECK_FALSE(is_nibble_permutation(dup));
}

TEST_CASE("key hex") {
  CHECK(parse_key_hex("0102ff") == Bytes{1, 2, 0xFF});
  CHECK(parse_key_hex("0A0b") == Bytes{0x0A, 0x0B});
  for (const char* bad : {"", "abc", "zz"}) {
    try {
      parse_key_hex(bad);
      FAIL("accepted " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::invalid_key);
    }
  }
}
