#include "v6covert/pcap_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <string>

#include "v6covert/error.hpp"

namespace v6covert {
namespace {

constexpr std::uint32_t kMagicMicros = 0xA1B2C3D4;
constexpr std::uint32_t kMagicMicrosSwapped = 0xD4C3B2A1;
constexpr std::uint32_t kMagicNanos = 0xA1B23C4D;
constexpr std::uint32_t kMagicNanosSwapped = 0x4D3CB2A1;
constexpr std::size_t kGlobalHeaderSize = 24;
constexpr std::size_t kRecordHeaderSize = 16;

std::uint32_t load_le32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00) | ((v << 8) & 0xFF0000) | (v << 24);
}

std::uint16_t load_be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

std::uint32_t load_be32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 |
         std::uint32_t{p[3]};
}

void put_le32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_le16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

Bytes default_ethernet_header() {
  Bytes h(kEthernetHeaderSize, 0);
  h[12] = kEthertypeIpv6 >> 8;
  h[13] = kEthertypeIpv6 & 0xFF;
  return h;
}

}  // namespace

LinkType link_type_from_int(std::uint32_t value) {
  switch (value) {
    case 1: return LinkType::ethernet;
    case 101: return LinkType::raw;
    default:
      throw Error(Errc::unreadable_capture,
                  "unsupported link type " + std::to_string(value) + " (expected 1 or 101)");
  }
}

Ipv6Packet parse_ipv6(ByteView bytes, LinkType link_type) {
  Ipv6Packet packet;
  packet.link_type = link_type;
  std::size_t offset = 0;
  if (link_type == LinkType::ethernet) {
    if (bytes.size() < kEthernetHeaderSize) {
      throw Error(Errc::truncated_packet, "frame shorter than an Ethernet header");
    }
    if (load_be16(bytes.data() + 12) != kEthertypeIpv6) {
      throw Error(Errc::not_ipv6, "ethertype is not 0x86DD");
    }
    packet.link_header.assign(bytes.begin(), bytes.begin() + kEthernetHeaderSize);
    offset = kEthernetHeaderSize;
  }
  if (bytes.size() - offset < kIpv6HeaderSize) {
    throw Error(Errc::truncated_packet, "fewer than 40 bytes of IPv6 header");
  }
  const std::uint8_t* h = bytes.data() + offset;
  if ((h[0] >> 4) != 6) {
    throw Error(Errc::not_ipv6, "version nibble is " + std::to_string(h[0] >> 4));
  }
  const std::uint32_t first_word = load_be32(h);
  packet.traffic_class = static_cast<std::uint8_t>((first_word >> 20) & 0xFF);
  packet.flow_label = first_word & 0xFFFFF;
  packet.payload_length_declared = load_be16(h + 4);
  packet.next_header = h[6];
  packet.hop_limit = h[7];
  std::copy_n(h + 8, 16, packet.src.begin());
  std::copy_n(h + 24, 16, packet.dst.begin());
  packet.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset + kIpv6HeaderSize),
                        bytes.end());
  return packet;
}

Bytes serialize_ipv6(const Ipv6Packet& packet, LinkType link_type) {
  const std::size_t link = link_type == LinkType::ethernet ? kEthernetHeaderSize : 0;
  Bytes out(link + kIpv6HeaderSize + packet.payload.size());
  std::uint8_t* w = out.data();
  if (link_type == LinkType::ethernet) {
    const bool own = packet.link_type == LinkType::ethernet && packet.link_header.size() == kEthernetHeaderSize;
    const Bytes h = own ? packet.link_header : default_ethernet_header();
    w = std::copy(h.begin(), h.end(), w);
  }
  const std::uint32_t first_word = (std::uint32_t{6} << 28) |
                                   (std::uint32_t{packet.traffic_class} << 20) |
                                   (packet.flow_label & 0xFFFFF);
  *w++ = static_cast<std::uint8_t>(first_word >> 24);
  *w++ = static_cast<std::uint8_t>(first_word >> 16);
  *w++ = static_cast<std::uint8_t>(first_word >> 8);
  *w++ = static_cast<std::uint8_t>(first_word);
  *w++ = static_cast<std::uint8_t>(packet.payload_length_declared >> 8);
  *w++ = static_cast<std::uint8_t>(packet.payload_length_declared);
  *w++ = packet.next_header;
  *w++ = packet.hop_limit;
  w = std::copy(packet.src.begin(), packet.src.end(), w);
  w = std::copy(packet.dst.begin(), packet.dst.end(), w);
  std::copy(packet.payload.begin(), packet.payload.end(), w);
  return out;
}

Bytes serialize_ipv6(const Ipv6Packet& packet) { return serialize_ipv6(packet, packet.link_type); }

PcapContents decode_pcap(ByteView file_bytes) {
  if (file_bytes.size() < kGlobalHeaderSize) {
    throw Error(Errc::unreadable_capture, "file shorter than the 24-byte pcap global header");
  }
  const std::uint32_t magic = load_le32(file_bytes.data());
  bool swapped = false;
  if (magic == kMagicMicros) {
    swapped = false;
  } else if (magic == kMagicMicrosSwapped) {
    swapped = true;
  } else if (magic == kMagicNanos || magic == kMagicNanosSwapped) {
    throw Error(Errc::unreadable_capture, "nanosecond-resolution pcap files are not supported");
  } else {
    throw Error(Errc::unreadable_capture, "not a classic pcap file (bad magic)");
  }
  auto read32 = [swapped](const std::uint8_t* p) {
    const std::uint32_t v = load_le32(p);
    return swapped ? byteswap32(v) : v;
  };

  PcapContents contents;
  contents.snaplen = read32(file_bytes.data() + 16);
  contents.link_type = link_type_from_int(read32(file_bytes.data() + 20));

  std::size_t pos = kGlobalHeaderSize;
  std::size_t record_index = 0;
  while (pos < file_bytes.size()) {
    if (file_bytes.size() - pos < kRecordHeaderSize) {
      throw Error(Errc::truncated_record,
                  "record " + std::to_string(record_index) + ": truncated record header");
    }
    const std::uint8_t* rh = file_bytes.data() + pos;
    const std::uint32_t ts_sec = read32(rh);
    const std::uint32_t ts_usec = read32(rh + 4);
    const std::uint32_t incl_len = read32(rh + 8);
    const std::uint32_t orig_len = read32(rh + 12);
    pos += kRecordHeaderSize;
    if (file_bytes.size() - pos < incl_len) {
      throw Error(Errc::truncated_record,
                  "record " + std::to_string(record_index) + ": truncated record body");
    }
    const ByteView body = file_bytes.subspan(pos, incl_len);
    pos += incl_len;
    ++record_index;
    try {
      Ipv6Packet packet = parse_ipv6(body, contents.link_type);
      packet.timestamp = {ts_sec, ts_usec};
      packet.original_length = orig_len == incl_len ? 0 : orig_len;
      contents.packets.push_back(std::move(packet));
    } catch (const Error& e) {
      if (e.code() != Errc::not_ipv6 && e.code() != Errc::truncated_packet) throw;
      ++contents.skipped;
    }
  }
  return contents;
}

Bytes encode_pcap(std::span<const Ipv6Packet> packets, LinkType link_type, std::uint32_t snaplen) {
  Bytes out;
  put_le32(out, kMagicMicros);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);  // thiszone
  put_le32(out, 0);  // sigfigs
  put_le32(out, snaplen);
  put_le32(out, static_cast<std::uint32_t>(link_type));
  for (const Ipv6Packet& packet : packets) {
    const Bytes frame = serialize_ipv6(packet, link_type);
    const auto incl_len = static_cast<std::uint32_t>(frame.size());
    put_le32(out, packet.timestamp.sec);
    put_le32(out, packet.timestamp.usec);
    put_le32(out, incl_len);
    put_le32(out, std::max(packet.original_length, incl_len));
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

PcapContents read_pcap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Errc::io, "cannot open " + path.string());
  }
  const Bytes data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_pcap(data);
}

std::size_t write_pcap(std::span<const Ipv6Packet> packets, const std::filesystem::path& path,
                       LinkType link_type) {
  const Bytes data = encode_pcap(packets, link_type);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw Error(Errc::io, "write failed: " + path.string());
  }
  return packets.size();
}

std::optional<TcpSegmentInfo> parse_tcp(const Ipv6Packet& packet) {
  const Bytes& p = packet.payload;
  if (packet.next_header != kProtoTcp || p.size() < 20) return std::nullopt;
  TcpSegmentInfo info;
  info.src_port = load_be16(p.data());
  info.dst_port = load_be16(p.data() + 2);
  info.seq = load_be32(p.data() + 4);
  info.ack = load_be32(p.data() + 8);
  info.header_length = static_cast<std::size_t>(p[12] >> 4) * 4;
  info.flags = p[13];
  if (info.header_length < 20 || info.header_length > p.size()) return std::nullopt;
  info.sequence_length = static_cast<std::uint32_t>(p.size() - info.header_length);
  if (info.flags & tcp_flags::syn) ++info.sequence_length;
  if (info.flags & tcp_flags::fin) ++info.sequence_length;
  return info;
}

std::optional<PortPair> transport_ports(const Ipv6Packet& packet) {
  if ((packet.next_header != kProtoTcp && packet.next_header != kProtoUdp) ||
      packet.payload.size() < 4) {
    return std::nullopt;
  }
  return PortPair{load_be16(packet.payload.data()), load_be16(packet.payload.data() + 2)};
}

bool is_icmpv6(const Ipv6Packet& packet) {
  return packet.next_header == kProtoIcmpv6 && !packet.payload.empty();
}

bool is_icmpv6_error(const Ipv6Packet& packet) {
  return is_icmpv6(packet) && packet.payload[0] < 128;
}

bool is_icmpv6_echo(const Ipv6Packet& packet) {
  return is_icmpv6(packet) && (packet.payload[0] == 128 || packet.payload[0] == 129);
}

}  // namespace v6covert

namespace v6covert {
namespace {

std::optional<std::size_t> checksum_offset(const Ipv6Packet& packet) {
  switch (packet.next_header) {
    case kProtoTcp: return packet.payload.size() >= 20 ? std::optional<std::size_t>{16} : std::nullopt;
    case kProtoUdp: return packet.payload.size() >= 8 ? std::optional<std::size_t>{6} : std::nullopt;
    case kProtoIcmpv6: return packet.payload.size() >= 4 ? std::optional<std::size_t>{2} : std::nullopt;
    default: return std::nullopt;
  }
}

}  // namespace

std::optional<std::uint16_t> l4_checksum(const Ipv6Packet& packet) {
  const auto offset = checksum_offset(packet);
  if (!offset) return std::nullopt;
  std::uint64_t sum = 0;
  auto add_bytes = [&sum](const std::uint8_t* p, std::size_t n, std::size_t skip) {
    for (std::size_t k = 0; k < n; k += 2) {
      const std::uint8_t hi = (k == skip) ? 0 : p[k];
      const std::uint8_t lo = (k + 1 < n && k != skip) ? p[k + 1] : 0;
      sum += std::uint32_t{hi} << 8 | lo;
    }
  };
  constexpr std::size_t kNoSkip = SIZE_MAX;
  add_bytes(packet.src.data(), 16, kNoSkip);
  add_bytes(packet.dst.data(), 16, kNoSkip);
  const auto length = static_cast<std::uint32_t>(packet.payload.size());
  sum += length >> 16;
  sum += length & 0xFFFF;
  sum += packet.next_header;
  add_bytes(packet.payload.data(), packet.payload.size(), *offset);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  auto result = static_cast<std::uint16_t>(~sum & 0xFFFF);
  if (packet.next_header == kProtoUdp && result == 0) result = 0xFFFF;
  return result;
}

void refresh_l4_checksum(Ipv6Packet& packet) {
  const auto offset = checksum_offset(packet);
  const auto sum = l4_checksum(packet);
  if (!offset || !sum) return;
  packet.payload[*offset] = static_cast<std::uint8_t>(*sum >> 8);
  packet.payload[*offset + 1] = static_cast<std::uint8_t>(*sum & 0xFF);
}

}  // namespace v6covert
