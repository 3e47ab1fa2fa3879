#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace v6covert {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Ipv6Address = std::array<std::uint8_t, 16>;

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;
inline constexpr std::uint8_t kProtoIcmpv6 = 58;

inline constexpr std::size_t kIpv6HeaderSize = 40;
inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::uint16_t kEthertypeIpv6 = 0x86DD;

enum class LinkType : std::uint32_t {
  ethernet = 1,
  raw = 101,
};

struct Timestamp {
  std::uint32_t sec = 0;
  std::uint32_t usec = 0;

  auto operator<=>(const Timestamp&) const = default;

  std::uint64_t micros() const { return std::uint64_t{sec} * 1'000'000 + usec; }
  static Timestamp from_micros(std::uint64_t us) {
    return {static_cast<std::uint32_t>(us / 1'000'000), static_cast<std::uint32_t>(us % 1'000'000)};
  }
};

// A captured IPv6 packet: the fixed 40-byte header decoded into fields, the
// upper-layer bytes as captured, and the capture record metadata needed to
// write the packet back out unchanged.
struct Ipv6Packet {
  static constexpr std::uint8_t version = 6;

  std::uint8_t traffic_class = 0;
  std::uint32_t flow_label = 0;  // 20 bits
  std::uint16_t payload_length_declared = 0;
  std::uint8_t next_header = 0;
  std::uint8_t hop_limit = 0;
  Ipv6Address src{};
  Ipv6Address dst{};
  Bytes payload;

  Timestamp timestamp;
  LinkType link_type = LinkType::raw;
  // Link-layer header bytes as captured (14 for Ethernet, empty for raw IP).
  Bytes link_header;
  // orig_len of the capture record; 0 means "equal to the captured length".
  std::uint32_t original_length = 0;

  std::uint8_t dscp() const { return traffic_class >> 2; }
  std::uint8_t ecn() const { return traffic_class & 0x3; }

  bool operator==(const Ipv6Packet&) const = default;
};

// Decodes one capture record body. For Ethernet the ethertype must be 0x86DD.
// Throws Error{not_ipv6} or Error{truncated_packet}.
Ipv6Packet parse_ipv6(ByteView bytes, LinkType link_type);

// Inverse of parse_ipv6: link header (if any) + 40-byte header + payload.
// Packets whose link type differs from `link_type` are re-encapsulated with a
// synthesized header.
Bytes serialize_ipv6(const Ipv6Packet& packet, LinkType link_type);
Bytes serialize_ipv6(const Ipv6Packet& packet);

struct PcapContents {
  std::vector<Ipv6Packet> packets;
  std::size_t skipped = 0;
  LinkType link_type = LinkType::raw;
  std::uint32_t snaplen = 65535;
};

PcapContents decode_pcap(ByteView file_bytes);
Bytes encode_pcap(std::span<const Ipv6Packet> packets, LinkType link_type,
                  std::uint32_t snaplen = 65535);

PcapContents read_pcap(const std::filesystem::path& path);
std::size_t write_pcap(std::span<const Ipv6Packet> packets, const std::filesystem::path& path,
                       LinkType link_type = LinkType::raw);

LinkType link_type_from_int(std::uint32_t value);

// ---- upper-layer helpers -------------------------------------------------

namespace tcp_flags {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
}  // namespace tcp_flags

struct TcpSegmentInfo {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t flags = 0;
  std::size_t header_length = 0;
  // Sequence space consumed: data bytes, plus one each for SYN and FIN.
  std::uint32_t sequence_length = 0;
};

std::optional<TcpSegmentInfo> parse_tcp(const Ipv6Packet& packet);

struct PortPair {
  std::uint16_t src = 0;
  std::uint16_t dst = 0;
};

// Present iff next_header is TCP or UDP and at least 4 payload bytes exist.
std::optional<PortPair> transport_ports(const Ipv6Packet& packet);

bool is_icmpv6(const Ipv6Packet& packet);
bool is_icmpv6_error(const Ipv6Packet& packet);
bool is_icmpv6_echo(const Ipv6Packet& packet);

// Internet checksum over the IPv6 pseudo-header and the captured payload,
// for TCP, UDP and ICMPv6. The pseudo-header length is the captured payload
// size, not payload_length_declared.
std::optional<std::uint16_t> l4_checksum(const Ipv6Packet& packet);
// Recomputes and stores the checksum in place; no-op for other protocols.
void refresh_l4_checksum(Ipv6Packet& packet);

// Serial-number comparison (RFC 1982) on 32-bit TCP sequence numbers.
constexpr bool seq_after(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::int32_t>(a - b) > 0;
}

}  // namespace v6covert
