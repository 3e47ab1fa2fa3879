#include <filesystem>

#include "doctest.h"
#include "support.hpp"
#include "v6covert/dataset.hpp"
#include "v6covert/error.hpp"
#include "v6covert/pcap_io.hpp"

using namespace v6covert;
using namespace testsupport;

namespace {

Bytes header40(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2, std::uint8_t b3, std::uint8_t hop = 64) {
  Bytes h(40, 0);
  h[0] = b0;
  h[1] = b1;
  h[2] = b2;
  h[3] = b3;
  h[6] = 59;  // no next header
  h[7] = hop;
  return h;
}

void le32(Bytes& b, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

Bytes global_header(std::uint32_t linktype) {
  Bytes b;
  le32(b, 0xA1B2C3D4);
  b.push_back(2), b.push_back(0), b.push_back(4), b.push_back(0);
  le32(b, 0);
  le32(b, 0);
  le32(b, 65535);
  le32(b, linktype);
  return b;
}

void record(Bytes& file, const Bytes& body) {
  le32(file, 1);
  le32(file, 0);
  le32(file, static_cast<std::uint32_t>(body.size()));
  le32(file, static_cast<std::uint32_t>(body.size()));
  file.insert(file.end(), body.begin(), body.end());
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::io;
}

}  // namespace

TEST_CASE("zero traffic class and label") {
  const auto p = parse_ipv6(header40(0x60, 0, 0, 0), LinkType::raw);
  CHECK(p.dscp() == 0);
  CHECK(p.ecn() == 0);
  CHECK(p.flow_label == 0);
}

TEST_CASE("flow label EF1C0 in the low 20 bits") {
  const auto p = parse_ipv6(header40(0x60, 0x0E, 0xF1, 0xC0), LinkType::raw);
  CHECK(p.flow_label == 0xEF1C0);
  CHECK(p.traffic_class == 0);
}

TEST_CASE("traffic class straddles the first two bytes") {
  // tc = 0xB9 -> dscp 46, ecn 1
  const auto p = parse_ipv6(header40(0x6B, 0x90, 0, 0), LinkType::raw);
  CHECK(p.traffic_class == 0xB9);
  CHECK(p.dscp() == 46);
  CHECK(p.ecn() == 1);
}

TEST_CASE("hop limit byte") {
  CHECK(parse_ipv6(header40(0x60, 0, 0, 0, 64), LinkType::raw).hop_limit == 64);
}

TEST_CASE("bad version and short header") {
  CHECK(code_of([] { parse_ipv6(header40(0x45, 0, 0, 0), LinkType::raw); }) == Errc::not_ipv6);
  Bytes shortie = header40(0x60, 0, 0, 0);
  shortie.resize(39);
  CHECK(code_of([&] { parse_ipv6(shortie, LinkType::raw); }) == Errc::truncated_packet);
  Bytes eth(14, 0);
  eth[12] = 0x08;  // IPv4 ethertype
  Bytes frame = eth;
  const auto h = header40(0x60, 0, 0, 0);
  frame.insert(frame.end(), h.begin(), h.end());
  CHECK(code_of([&] { parse_ipv6(frame, LinkType::ethernet); }) == Errc::not_ipv6);
}

TEST_CASE("serialize inverts parse") {
  const auto pkt = udp_packet(addr(1, 2), addr(3, 4), 5353, 53, 31, 0xABCDE);
  const Bytes raw = serialize_ipv6(pkt, LinkType::raw);
  CHECK(raw.size() == 40 + pkt.payload.size());
  auto back = parse_ipv6(raw, LinkType::raw);
  back.timestamp = pkt.timestamp;
  CHECK(back == pkt);
  CHECK(serialize_ipv6(back, LinkType::raw) == raw);
}

TEST_CASE("empty capture") {
  const auto contents = decode_pcap(global_header(101));
  CHECK(contents.packets.empty());
  CHECK(contents.skipped == 0);
  CHECK(encode_pcap({}, LinkType::raw).size() == 24);
}

TEST_CASE("IPv4 record is skipped") {
  Bytes file = global_header(101);
  Bytes v4(20, 0);
  v4[0] = 0x45;
  record(file, v4);
  record(file, header40(0x60, 0, 0, 1));
  const auto contents = decode_pcap(file);
  REQUIRE(contents.packets.size() == 1);
  CHECK(contents.skipped == 1);
  CHECK(contents.packets[0].flow_label == 1);
  CHECK(contents.packets[0].timestamp.sec == 1);
}

TEST_CASE("byte-swapped magic is accepted") {
  Bytes file = encode_pcap({}, LinkType::raw);
  Bytes swapped;
  auto put_be = [&](std::uint32_t v) {
    for (int k = 3; k >= 0; --k) swapped.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  };
  put_be(0xA1B2C3D4);
  swapped.push_back(0), swapped.push_back(2), swapped.push_back(0), swapped.push_back(4);
  put_be(0);
  put_be(0);
  put_be(65535);
  put_be(101);
  const Bytes body = header40(0x60, 0x01, 0x23, 0x45);
  put_be(7);
  put_be(8);
  put_be(static_cast<std::uint32_t>(body.size()));
  put_be(static_cast<std::uint32_t>(body.size()));
  swapped.insert(swapped.end(), body.begin(), body.end());
  const auto contents = decode_pcap(swapped);
  REQUIRE(contents.packets.size() == 1);
  CHECK(contents.packets[0].flow_label == 0x12345);
  CHECK(contents.packets[0].timestamp.usec == 8);
}

TEST_CASE("malformed files") {
  CHECK(code_of([] { decode_pcap(Bytes(10, 0)); }) == Errc::unreadable_capture);
  Bytes bad = global_header(101);
  bad[0] = 0x00;
  CHECK(code_of([&] { decode_pcap(bad); }) == Errc::unreadable_capture);
  Bytes nano = global_header(101);
  nano[0] = 0x4D, nano[1] = 0x3C, nano[2] = 0xB2, nano[3] = 0xA1;
  CHECK(code_of([&] { decode_pcap(nano); }) == Errc::unreadable_capture);

  Bytes cut = global_header(101);
  record(cut, header40(0x60, 0, 0, 0));
  cut.resize(cut.size() - 5);
  try {
    decode_pcap(cut);
    FAIL("truncated record accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::truncated_record);
    CHECK(std::string(e.what()).find('0') != std::string::npos);
  }
}

TEST_CASE("file round trip of generated traffic") {
  const auto bg = generate_background(100, 7);
  const auto path = std::filesystem::temp_directory_path() / "v6covert_pcap_rt.pcap";
  CHECK(write_pcap(bg.packets, path) == 100);
  const auto back = read_pcap(path);
  CHECK(back.skipped == 0);
  CHECK(back.packets == bg.packets);
  std::filesystem::remove(path);
}

TEST_CASE("ethernet frames keep their link header") {
  auto pkt = tcp_packet(addr(1, 1), addr(2, 2), 40000, 443, 1000, 10);
  pkt.link_type = LinkType::ethernet;
  pkt.link_header = Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 0x86, 0xDD};
  const std::vector<Ipv6Packet> one{pkt};
  const auto file = encode_pcap(one, LinkType::ethernet);
  const auto back = decode_pcap(file);
  CHECK(back.link_type == LinkType::ethernet);
  REQUIRE(back.packets.size() == 1);
  CHECK(back.packets[0].link_header == pkt.link_header);
  CHECK(encode_pcap(back.packets, LinkType::ethernet) == file);
}

TEST_CASE("write to an unwritable path") {
  CHECK(code_of([] { write_pcap({}, "/nonexistent-dir/x.pcap"); }) == Errc::io);
}

TEST_CASE("tcp parsing and sequence length") {
  const auto syn = tcp_packet(addr(1, 1), addr(2, 2), 1, 2, 77, 0, 0x02);
  const auto info = parse_tcp(syn);
  REQUIRE(info);
  CHECK(info->seq == 77);
  CHECK(info->sequence_length == 1);
  const auto data = parse_tcp(tcp_packet(addr(1, 1), addr(2, 2), 1, 2, 77, 100, 0x11));
  CHECK(data->sequence_length == 101);
  CHECK_FALSE(parse_tcp(udp_packet(addr(1, 1), addr(2, 2), 1, 2)));
}

TEST_CASE("serial arithmetic wraps") {
  CHECK(seq_after(5, 0xFFFFFFF0u));
  CHECK_FALSE(seq_after(0xFFFFFFF0u, 5));
  CHECK_FALSE(seq_after(9, 9));
}

TEST_CASE("stored checksum verifies") {
  auto pkt = udp_packet(addr(1, 1), addr(2, 2), 1000, 2000, 13);
  refresh_l4_checksum(pkt);
  CHECK(l4_checksum(pkt) == std::uint16_t(pkt.payload[6] << 8 | pkt.payload[7]));
  // Receiver-side check: the one's-complement sum over pseudo-header and
  // payload, checksum included, folds to 0xFFFF.
  Bytes all;
  for (auto b : pkt.src) all.push_back(b);
  for (auto b : pkt.dst) all.push_back(b);
  const auto n = static_cast<std::uint32_t>(pkt.payload.size());
  for (int k = 3; k >= 0; --k) all.push_back(static_cast<std::uint8_t>(n >> (8 * k)));
  for (std::uint8_t b : {0, 0, 0, 17}) all.push_back(b);
  for (auto b : pkt.payload) all.push_back(b);
  if (all.size() % 2) all.push_back(0);
  std::uint32_t sum = 0;
  for (std::size_t k = 0; k < all.size(); k += 2) sum += std::uint32_t(all[k] << 8 | all[k + 1]);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  CHECK(sum == 0xFFFF);
}

TEST_CASE("icmp classification") {
  CHECK(is_icmpv6_error(icmp_packet(addr(1, 1), addr(2, 2), 1)));
  CHECK_FALSE(is_icmpv6_error(icmp_packet(addr(1, 1), addr(2, 2), 128)));
  CHECK(is_icmpv6_echo(icmp_packet(addr(1, 1), addr(2, 2), 129)));
}
