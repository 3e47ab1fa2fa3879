#include "doctest.h"
#include "support.hpp"
#include "v6covert/flow_table.hpp"

using namespace v6covert;
using namespace testsupport;

TEST_CASE("direction-sensitive keys") {
  const auto a = addr(1, 1), b = addr(2, 2);
  const std::vector<Ipv6Packet> pkts = {
      udp_packet(a, b, 5000, 53),
      udp_packet(a, b, 5000, 53),
      udp_packet(b, a, 53, 5000),
  };
  const auto table = build_flow_table(pkts);
  CHECK(table.size() == 2);
  CHECK(table.flows()[0].packet_indices == std::vector<std::size_t>{0, 1});
  CHECK(table.flows()[1].packet_indices == std::vector<std::size_t>{2});
  CHECK(table.flow_index_of(2) == 1);
  CHECK(table.find(flow_key_of(pkts[2])) == &table.flows()[1]);
}

TEST_CASE("last tcp sequence follows data length") {
  const auto a = addr(1, 1), b = addr(2, 2);
  const std::vector<Ipv6Packet> pkts = {
      tcp_packet(a, b, 40000, 80, 1000, 100),
      tcp_packet(a, b, 40000, 80, 1100, 100),
  };
  const auto table = build_flow_table(pkts);
  REQUIRE(table.size() == 1);
  CHECK(table.flows()[0].last_tcp_seq == 1200u);
}

TEST_CASE("retransmission does not move the sequence backwards") {
  const auto a = addr(1, 1), b = addr(2, 2);
  const std::vector<Ipv6Packet> pkts = {
      tcp_packet(a, b, 1, 2, 1000, 100),
      tcp_packet(a, b, 1, 2, 1100, 100),
      tcp_packet(a, b, 1, 2, 1000, 100),
  };
  CHECK(build_flow_table(pkts).flows()[0].last_tcp_seq == 1200u);
}

TEST_CASE("distinct flow labels") {
  const auto a = addr(1, 1), b = addr(2, 2);
  const std::vector<Ipv6Packet> pkts = {
      udp_packet(a, b, 7, 8, 10, 0x12345),
      udp_packet(a, b, 7, 8, 10, 0x12345),
      udp_packet(a, b, 7, 8, 10, 0x54321),
  };
  CHECK(build_flow_table(pkts).flows()[0].distinct_flow_labels.size() == 2);
}

TEST_CASE("ports absent without a transport header") {
  const auto a = addr(1, 1), b = addr(2, 2);
  auto p = udp_packet(a, b, 7, 8);
  p.payload.resize(3);
  const auto key = flow_key_of(p);
  CHECK_FALSE(key.src_port);
  CHECK_FALSE(key.dst_port);
  const auto icmp = flow_key_of(icmp_packet(a, b, 128));
  CHECK_FALSE(icmp.src_port);
}

TEST_CASE("hop limit mode is the most common value") {
  const auto a = addr(1, 1), b = addr(2, 2);
  std::vector<Ipv6Packet> pkts;
  for (std::uint8_t h : {57, 57, 128, 57, 255}) {
    auto p = udp_packet(a, b, 1, 2);
    p.hop_limit = h;
    pkts.push_back(p);
  }
  CHECK(build_flow_table(pkts).flows()[0].hop_limit_mode == 57);
}

TEST_CASE("empty input") {
  const auto table = build_flow_table({});
  CHECK(table.size() == 0);
  CHECK(table.packet_count() == 0);
}
