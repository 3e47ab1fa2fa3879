#include "v6covert/channels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "v6covert/error.hpp"

namespace v6covert {
namespace {

constexpr std::array<std::string_view, kChannelKindCount> kChannelNames = {
    "normal", "hoplimit", "address", "length", "flowlabel"};

// log2(3)
constexpr double kTritBits = 1.5849625007211562;

void check_carriers(std::span<const std::size_t> carriers, std::size_t packet_count,
                    std::size_t needed, std::string_view channel) {
  if (carriers.size() < needed) {
    throw Error(Errc::capacity, std::string(channel) + " channel needs " + std::to_string(needed) +
                                    " carriers, got " + std::to_string(carriers.size()));
  }
  std::vector<std::size_t> used(carriers.begin(), carriers.begin() + static_cast<std::ptrdiff_t>(needed));
  std::sort(used.begin(), used.end());
  if (!used.empty() && used.back() >= packet_count) {
    throw Error(Errc::invalid_argument, "carrier index out of range");
  }
  if (std::adjacent_find(used.begin(), used.end()) != used.end()) {
    throw Error(Errc::invalid_argument, "carrier index listed twice");
  }
}

Bytes padded(ByteView message, std::size_t block) {
  Bytes out(message.begin(), message.end());
  out.resize((message.size() + block - 1) / block * block, 0x00);
  return out;
}

}  // namespace

std::string_view channel_name(ChannelKind kind) {
  return kChannelNames[static_cast<std::size_t>(kind)];
}

std::optional<ChannelKind> parse_channel(std::string_view name) {
  for (std::size_t k = 0; k < kChannelNames.size(); ++k) {
    if (kChannelNames[k] == name) return static_cast<ChannelKind>(k);
  }
  return std::nullopt;
}

// ---- FlowLabel -----------------------------------------------------------

bool is_flowlabel_carrier(const Ipv6Packet& packet) {
  return packet.next_header == kProtoUdp || is_icmpv6_error(packet);
}

std::vector<Ipv6Packet> embed_flowlabel(std::vector<Ipv6Packet> packets,
                                        std::span<const std::size_t> carriers, ByteView message,
                                        const SharedSecret& secret) {
  const std::size_t needed = carriers_needed(ChannelKind::flow_label, message.size());
  check_carriers(carriers, packets.size(), needed, "flowlabel");
  for (std::size_t p = 0; p < needed; ++p) {
    const Ipv6Packet& carrier = packets[carriers[p]];
    if (!is_flowlabel_carrier(carrier)) {
      throw Error(Errc::ineligible_carrier,
                  "flowlabel carrier " + std::to_string(carriers[p]) +
                      " is not UDP or an ICMPv6 error (next_header " +
                      std::to_string(carrier.next_header) + ")");
    }
  }
  Rc4State rc4 = secret.keystream();
  const Bytes cipher = rc4.apply(padded(message, 2));
  for (std::size_t p = 0; p < needed; ++p) {
    const std::uint32_t low = std::uint32_t{cipher[2 * p]} << 8 | cipher[2 * p + 1];
    packets[carriers[p]].flow_label = std::uint32_t{sequence_nibble(secret, p)} << 16 | low;
  }
  return packets;
}

FlowLabelExtraction extract_flowlabel(std::span<const Ipv6Packet> packets,
                                      const SharedSecret& secret,
                                      std::optional<std::size_t> message_length) {
  FlowLabelExtraction result;
  struct Carrier {
    int position;
    std::uint16_t cipher;
  };
  std::vector<Carrier> carriers;
  for (const Ipv6Packet& packet : packets) {
    const int position = sequence_position(secret, static_cast<std::uint8_t>(packet.flow_label >> 16));
    if (position < 0) {
      ++result.skipped;
      continue;
    }
    carriers.push_back({position, static_cast<std::uint16_t>(packet.flow_label & 0xFFFF)});
  }
  for (std::size_t start = 0; start < carriers.size(); start += 16) {
    const auto first = carriers.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = carriers.begin() + static_cast<std::ptrdiff_t>(std::min(start + 16, carriers.size()));
    std::stable_sort(first, last, [](const Carrier& a, const Carrier& b) { return a.position < b.position; });
  }
  Bytes cipher;
  cipher.reserve(carriers.size() * 2);
  for (const Carrier& c : carriers) {
    cipher.push_back(static_cast<std::uint8_t>(c.cipher >> 8));
    cipher.push_back(static_cast<std::uint8_t>(c.cipher));
  }
  Rc4State rc4 = secret.keystream();
  result.message = rc4.apply(cipher);
  if (message_length) {
    if (*message_length > result.message.size()) {
      throw Error(Errc::capacity, "flowlabel carriers hold " + std::to_string(result.message.size()) +
                                      " bytes, " + std::to_string(*message_length) + " requested");
    }
    result.message.resize(*message_length);
  }
  return result;
}

// ---- Hop Limit -----------------------------------------------------------

std::uint8_t HopLimitAlphabet::value_of(std::uint8_t symbol) const {
  switch (symbol) {
    case 0: return 64;
    case 1: return 128;
    case 2:
      if (mode == HopLimitMode::ternary) return 255;
      break;
    default: break;
  }
  throw Error(Errc::invalid_argument, "hop-limit symbol " + std::to_string(symbol) +
                                          " outside the alphabet");
}

std::size_t symbols_for_bytes(std::size_t byte_count, HopLimitMode mode) {
  if (mode == HopLimitMode::binary) return 8 * byte_count;
  if (byte_count == 0) return 0;
  // 8·n / log2(3) is never an integer for n >= 1, so ceil is exact.
  return static_cast<std::size_t>(std::ceil(8.0 * static_cast<double>(byte_count) / kTritBits));
}

std::vector<std::uint8_t> message_to_symbols(ByteView message, HopLimitMode mode) {
  std::vector<std::uint8_t> symbols;
  if (mode == HopLimitMode::binary) {
    symbols.reserve(message.size() * 8);
    for (const auto b : message) {
      for (int bit = 7; bit >= 0; --bit) symbols.push_back((b >> bit) & 1);
    }
    return symbols;
  }
  // Long division of the big-endian number by 3, least significant digit first.
  Bytes number(message.begin(), message.end());
  const std::size_t digits = symbols_for_bytes(message.size(), mode);
  symbols.reserve(digits);
  for (std::size_t d = 0; d < digits; ++d) {
    unsigned remainder = 0;
    for (auto& b : number) {
      const unsigned cur = remainder << 8 | b;
      b = static_cast<std::uint8_t>(cur / 3);
      remainder = cur % 3;
    }
    symbols.push_back(static_cast<std::uint8_t>(remainder));
  }
  std::reverse(symbols.begin(), symbols.end());
  return symbols;
}

Bytes symbols_to_message(std::span<const std::uint8_t> symbols, HopLimitMode mode,
                         std::size_t byte_count) {
  Bytes message(byte_count, 0);
  if (mode == HopLimitMode::binary) {
    for (std::size_t k = 0; k < std::min(symbols.size(), 8 * byte_count); ++k) {
      if (symbols[k] & 1) message[k / 8] |= static_cast<std::uint8_t>(0x80 >> (k % 8));
    }
    return message;
  }
  for (const auto digit : symbols) {
    unsigned carry = digit;
    for (std::size_t k = byte_count; k-- > 0;) {
      const unsigned cur = message[k] * 3u + carry;
      message[k] = static_cast<std::uint8_t>(cur & 0xFF);
      carry = cur >> 8;
    }
  }
  return message;
}

std::vector<Ipv6Packet> embed_hoplimit(std::vector<Ipv6Packet> packets,
                                       std::span<const std::size_t> carriers,
                                       std::span<const std::uint8_t> symbols,
                                       HopLimitAlphabet alphabet) {
  check_carriers(carriers, packets.size(), symbols.size(), "hoplimit");
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    packets[carriers[k]].hop_limit = alphabet.value_of(symbols[k]);
  }
  return packets;
}

std::optional<std::uint8_t> decode_hop_limit(std::uint8_t value, HopLimitAlphabet alphabet,
                                             int assumed_max_hops) {
  if (value >= 64 - assumed_max_hops && value <= 96) return 0;
  if (value >= 97 && value <= 191) return 1;
  if (value >= 192 && alphabet.mode == HopLimitMode::ternary) return 2;
  return std::nullopt;
}

std::vector<std::optional<std::uint8_t>> extract_hoplimit(std::span<const Ipv6Packet> packets,
                                                          HopLimitAlphabet alphabet,
                                                          int assumed_max_hops) {
  std::vector<std::optional<std::uint8_t>> symbols;
  symbols.reserve(packets.size());
  for (const Ipv6Packet& packet : packets) {
    symbols.push_back(decode_hop_limit(packet.hop_limit, alphabet, assumed_max_hops));
  }
  return symbols;
}

// ---- Payload Length ------------------------------------------------------

std::vector<Ipv6Packet> embed_length(std::vector<Ipv6Packet> packets,
                                     std::span<const std::size_t> carriers, ByteView message,
                                     const SharedSecret& secret) {
  const std::size_t needed = carriers_needed(ChannelKind::length, message.size());
  check_carriers(carriers, packets.size(), needed, "length");
  const Bytes shifted = ascii_shift(padded(message, 2), secret.ascii_shift, ShiftDirection::forward);
  Rc4State rc4 = secret.keystream();
  const Bytes cipher = rc4.apply(shifted);
  for (std::size_t p = 0; p < needed; ++p) {
    packets[carriers[p]].payload_length_declared =
        static_cast<std::uint16_t>(cipher[2 * p] << 8 | cipher[2 * p + 1]);
  }
  return packets;
}

Bytes extract_length(std::span<const Ipv6Packet> packets, const SharedSecret& secret,
                     std::size_t message_length) {
  const std::size_t needed = carriers_needed(ChannelKind::length, message_length);
  if (packets.size() < needed) {
    throw Error(Errc::capacity, "length channel needs " + std::to_string(needed) + " packets, got " +
                                    std::to_string(packets.size()));
  }
  Bytes cipher;
  cipher.reserve(2 * needed);
  for (std::size_t p = 0; p < needed; ++p) {
    cipher.push_back(static_cast<std::uint8_t>(packets[p].payload_length_declared >> 8));
    cipher.push_back(static_cast<std::uint8_t>(packets[p].payload_length_declared));
  }
  Rc4State rc4 = secret.keystream();
  Bytes message = ascii_shift(rc4.apply(cipher), secret.ascii_shift, ShiftDirection::inverse);
  message.resize(message_length);
  return message;
}

// ---- Source address IID --------------------------------------------------

std::vector<Ipv6Packet> embed_address(std::vector<Ipv6Packet> packets,
                                      std::span<const std::size_t> carriers, ByteView message,
                                      const SharedSecret& secret) {
  const std::size_t needed = carriers_needed(ChannelKind::address, message.size());
  check_carriers(carriers, packets.size(), needed, "address");
  Rc4State rc4 = secret.keystream();
  const Bytes cipher = rc4.apply(padded(message, 8));
  for (std::size_t p = 0; p < needed; ++p) {
    auto& src = packets[carriers[p]].src;
    std::copy_n(cipher.begin() + static_cast<std::ptrdiff_t>(8 * p), 8, src.begin() + 8);
  }
  return packets;
}

Bytes extract_address(std::span<const Ipv6Packet> packets, const SharedSecret& secret,
                      std::size_t message_length) {
  const std::size_t needed = carriers_needed(ChannelKind::address, message_length);
  if (packets.size() < needed) {
    throw Error(Errc::capacity, "address channel needs " + std::to_string(needed) +
                                    " packets, got " + std::to_string(packets.size()));
  }
  Bytes cipher;
  cipher.reserve(8 * needed);
  for (std::size_t p = 0; p < needed; ++p) {
    cipher.insert(cipher.end(), packets[p].src.begin() + 8, packets[p].src.end());
  }
  Rc4State rc4 = secret.keystream();
  Bytes message = rc4.apply(cipher);
  message.resize(message_length);
  return message;
}

// ---- capacity ------------------------------------------------------------

std::size_t channel_capacity(ChannelKind channel, std::size_t packet_count, HopLimitMode mode) {
  switch (channel) {
    case ChannelKind::flow_label:
    case ChannelKind::length: return 2 * packet_count;
    case ChannelKind::address: return 8 * packet_count;
    case ChannelKind::hop_limit:
      if (mode == HopLimitMode::binary) return packet_count;
      return static_cast<std::size_t>(std::floor(static_cast<double>(packet_count) * kTritBits));
    case ChannelKind::normal: return 0;
  }
  return 0;
}

std::size_t carriers_needed(ChannelKind channel, std::size_t byte_count, HopLimitMode mode) {
  switch (channel) {
    case ChannelKind::flow_label:
    case ChannelKind::length: return (byte_count + 1) / 2;
    case ChannelKind::address: return (byte_count + 7) / 8;
    case ChannelKind::hop_limit: return symbols_for_bytes(byte_count, mode);
    case ChannelKind::normal: break;
  }
  throw Error(Errc::invalid_argument, "normal is not an embedding channel");
}

}  // namespace v6covert
