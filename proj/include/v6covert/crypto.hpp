#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "v6covert/pcap_io.hpp"

namespace v6covert {

// RC4 key schedule and keystream generator. Single-owner and mutable: each
// call to apply() consumes keystream.
class Rc4State {
 public:
  // Throws Error{invalid_key} unless 1 <= key.size() <= 256.
  explicit Rc4State(ByteView key);

  std::uint8_t next_byte();
  Bytes apply(ByteView data);

  const std::array<std::uint8_t, 256>& s_box() const { return s_; }
  std::uint8_t i() const { return i_; }
  std::uint8_t j() const { return j_; }

 private:
  std::array<std::uint8_t, 256> s_{};
  std::uint8_t i_ = 0;
  std::uint8_t j_ = 0;
};

inline Rc4State rc4_init(ByteView key) { return Rc4State(key); }
inline Bytes rc4_apply(Rc4State& state, ByteView data) { return state.apply(data); }

enum class ShiftDirection { forward, inverse };

// Adds (forward) or subtracts (inverse) `offset` modulo 256 from every byte.
Bytes ascii_shift(ByteView data, std::uint8_t offset, ShiftDirection direction);

using NibbleSequence = std::array<std::uint8_t, 16>;

// E,A,7,1,2,3,4,5,6,8,9,B,C,D,F,0
inline constexpr NibbleSequence kDefaultSequence = {0xE, 0xA, 0x7, 0x1, 0x2, 0x3, 0x4, 0x5,
                                                    0x6, 0x8, 0x9, 0xB, 0xC, 0xD, 0xF, 0x0};
inline constexpr std::uint8_t kDefaultAsciiShift = 13;

// Everything the two covert parties agree on beforehand.
struct SharedSecret {
  Bytes rc4_key;
  NibbleSequence sequence = kDefaultSequence;
  std::uint8_t ascii_shift = kDefaultAsciiShift;

  // Validates key length and that `sequence` is a permutation of 0x0..0xF.
  static SharedSecret make(Bytes key, NibbleSequence sequence = kDefaultSequence,
                           std::uint8_t shift = kDefaultAsciiShift);

  Rc4State keystream() const { return Rc4State(rc4_key); }
};

// sequence[position mod 16]
std::uint8_t sequence_nibble(const SharedSecret& secret, std::size_t position);

// Position of `nibble` within the permutation, or -1.
int sequence_position(const SharedSecret& secret, std::uint8_t nibble);

bool is_nibble_permutation(const NibbleSequence& sequence);

// "0102ab..." -> bytes. Throws Error{invalid_key} on odd length or bad digits.
Bytes parse_key_hex(std::string_view hex);
// 16 hex digits, optionally separated by commas/spaces; 'O' is read as 0.
NibbleSequence parse_sequence(std::string_view text);

std::string to_hex(ByteView bytes);

}  // namespace v6covert
