#include "v6covert/crypto.hpp"

#include <string>
#include <utility>

#include "v6covert/error.hpp"

namespace v6covert {
namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Rc4State::Rc4State(ByteView key) {
  if (key.empty() || key.size() > 256) {
    throw Error(Errc::invalid_key, "RC4 key must be 1..256 bytes, got " + std::to_string(key.size()));
  }
  for (std::size_t k = 0; k < 256; ++k) s_[k] = static_cast<std::uint8_t>(k);
  std::uint8_t j = 0;
  for (std::size_t k = 0; k < 256; ++k) {
    j = static_cast<std::uint8_t>(j + s_[k] + key[k % key.size()]);
    std::swap(s_[k], s_[j]);
  }
}

std::uint8_t Rc4State::next_byte() {
  i_ = static_cast<std::uint8_t>(i_ + 1);
  j_ = static_cast<std::uint8_t>(j_ + s_[i_]);
  std::swap(s_[i_], s_[j_]);
  return s_[static_cast<std::uint8_t>(s_[i_] + s_[j_])];
}

Bytes Rc4State::apply(ByteView data) {
  Bytes out(data.begin(), data.end());
  for (auto& b : out) b ^= next_byte();
  return out;
}

Bytes ascii_shift(ByteView data, std::uint8_t offset, ShiftDirection direction) {
  Bytes out(data.begin(), data.end());
  const auto delta = direction == ShiftDirection::forward
                         ? offset
                         : static_cast<std::uint8_t>(256 - offset);
  for (auto& b : out) b = static_cast<std::uint8_t>(b + delta);
  return out;
}

bool is_nibble_permutation(const NibbleSequence& sequence) {
  unsigned seen = 0;
  for (const auto n : sequence) {
    if (n > 0xF || (seen & (1u << n))) return false;
    seen |= 1u << n;
  }
  return seen == 0xFFFF;
}

SharedSecret SharedSecret::make(Bytes key, NibbleSequence sequence, std::uint8_t shift) {
  if (key.empty() || key.size() > 256) {
    throw Error(Errc::invalid_key, "RC4 key must be 1..256 bytes, got " + std::to_string(key.size()));
  }
  if (!is_nibble_permutation(sequence)) {
    throw Error(Errc::invalid_secret, "sequence must be a permutation of the 16 hex nibbles");
  }
  return SharedSecret{std::move(key), sequence, shift};
}

std::uint8_t sequence_nibble(const SharedSecret& secret, std::size_t position) {
  return secret.sequence[position % secret.sequence.size()];
}

int sequence_position(const SharedSecret& secret, std::uint8_t nibble) {
  for (std::size_t p = 0; p < secret.sequence.size(); ++p) {
    if (secret.sequence[p] == nibble) return static_cast<int>(p);
  }
  return -1;
}

Bytes parse_key_hex(std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.empty() || hex.size() % 2 != 0) {
    throw Error(Errc::invalid_key, "key hex must have an even, non-zero number of digits");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t k = 0; k < hex.size(); k += 2) {
    const int hi = hex_value(hex[k]);
    const int lo = hex_value(hex[k + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::invalid_key, "key hex contains a non-hex digit");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  if (out.size() > 256) throw Error(Errc::invalid_key, "RC4 key longer than 256 bytes");
  return out;
}

NibbleSequence parse_sequence(std::string_view text) {
  NibbleSequence seq{};
  std::size_t count = 0;
  for (const char c : text) {
    if (c == ',' || c == ' ' || c == '[' || c == ']') continue;
    const int v = (c == 'O' || c == 'o') ? 0 : hex_value(c);
    if (v < 0 || count == seq.size()) {
      throw Error(Errc::invalid_secret, "sequence must be exactly 16 hex digits");
    }
    seq[count++] = static_cast<std::uint8_t>(v);
  }
  if (count != seq.size()) throw Error(Errc::invalid_secret, "sequence must be exactly 16 hex digits");
  if (!is_nibble_permutation(seq)) {
    throw Error(Errc::invalid_secret, "sequence must use each hex digit exactly once");
  }
  return seq;
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

}  // namespace v6covert
