#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "v6covert/crypto.hpp"
#include "v6covert/pcap_io.hpp"

namespace v6covert {

// Label space of the detectors. The numeric value is the class index used by
// the models; `normal` is never an embedding target.
enum class ChannelKind : std::uint8_t {
  normal = 0,
  hop_limit = 1,
  address = 2,
  length = 3,
  flow_label = 4,
};

inline constexpr std::size_t kChannelKindCount = 5;
inline constexpr std::array<ChannelKind, 4> kCovertChannels = {
    ChannelKind::hop_limit, ChannelKind::address, ChannelKind::length, ChannelKind::flow_label};

// "normal", "hoplimit", "address", "length", "flowlabel"
std::string_view channel_name(ChannelKind kind);
std::optional<ChannelKind> parse_channel(std::string_view name);

// ---- FlowLabel -----------------------------------------------------------
//
// Each carrier's 20-bit label is <sequence nibble:4><ciphertext:16>. The
// whole message is encrypted as one RC4 stream, two bytes per carrier, with a
// 0x00 pad byte when the length is odd.

// UDP, or ICMPv6 with a type below 128 (error messages).
bool is_flowlabel_carrier(const Ipv6Packet& packet);

std::vector<Ipv6Packet> embed_flowlabel(std::vector<Ipv6Packet> packets,
                                        std::span<const std::size_t> carriers, ByteView message,
                                        const SharedSecret& secret);

struct FlowLabelExtraction {
  Bytes message;
  std::size_t skipped = 0;  // packets whose leading nibble is not in the sequence
};

// Packets are the carriers in received order. Reordering is undone within
// each block of 16 carriers.
FlowLabelExtraction extract_flowlabel(std::span<const Ipv6Packet> packets,
                                      const SharedSecret& secret,
                                      std::optional<std::size_t> message_length = std::nullopt);

// ---- Hop Limit -----------------------------------------------------------

enum class HopLimitMode { binary, ternary };

struct HopLimitAlphabet {
  HopLimitMode mode = HopLimitMode::binary;

  std::size_t radix() const { return mode == HopLimitMode::binary ? 2 : 3; }
  // 0 -> 64, 1 -> 128, 2 -> 255 (ternary only)
  std::uint8_t value_of(std::uint8_t symbol) const;
};

inline constexpr int kDefaultAssumedMaxHops = 31;

// Binary: message bits, most significant first. Ternary: the message read as
// one big-endian integer, written as the minimal number of base-3 digits
// that can hold any message of this length, most significant first.
std::vector<std::uint8_t> message_to_symbols(ByteView message, HopLimitMode mode);
Bytes symbols_to_message(std::span<const std::uint8_t> symbols, HopLimitMode mode,
                         std::size_t byte_count);
std::size_t symbols_for_bytes(std::size_t byte_count, HopLimitMode mode);

std::vector<Ipv6Packet> embed_hoplimit(std::vector<Ipv6Packet> packets,
                                       std::span<const std::size_t> carriers,
                                       std::span<const std::uint8_t> symbols,
                                       HopLimitAlphabet alphabet);

// One entry per packet; nullopt marks a value outside every decode range.
std::vector<std::optional<std::uint8_t>> extract_hoplimit(
    std::span<const Ipv6Packet> packets, HopLimitAlphabet alphabet,
    int assumed_max_hops = kDefaultAssumedMaxHops);

std::optional<std::uint8_t> decode_hop_limit(std::uint8_t value, HopLimitAlphabet alphabet,
                                             int assumed_max_hops = kDefaultAssumedMaxHops);

// ---- Payload Length ------------------------------------------------------
//
// Two plaintext bytes per carrier: ascii_shift forward, then RC4, written
// big-endian into payload_length_declared. Carriers must stay in order.

std::vector<Ipv6Packet> embed_length(std::vector<Ipv6Packet> packets,
                                     std::span<const std::size_t> carriers, ByteView message,
                                     const SharedSecret& secret);

Bytes extract_length(std::span<const Ipv6Packet> packets, const SharedSecret& secret,
                     std::size_t message_length);

// ---- Source address IID --------------------------------------------------
//
// Eight plaintext bytes per carrier, RC4-encrypted into src bytes 8..15. The
// /64 prefix is never touched.

std::vector<Ipv6Packet> embed_address(std::vector<Ipv6Packet> packets,
                                      std::span<const std::size_t> carriers, ByteView message,
                                      const SharedSecret& secret);

Bytes extract_address(std::span<const Ipv6Packet> packets, const SharedSecret& secret,
                      std::size_t message_length);

// Bytes per `packet_count` carriers (bits for HopLimit).
std::size_t channel_capacity(ChannelKind channel, std::size_t packet_count,
                             HopLimitMode mode = HopLimitMode::binary);

// Carriers needed for a message of `byte_count` bytes.
std::size_t carriers_needed(ChannelKind channel, std::size_t byte_count,
                            HopLimitMode mode = HopLimitMode::binary);

}  // namespace v6covert
