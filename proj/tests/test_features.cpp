#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "support.hpp"
#include "v6covert/dataset.hpp"
#include "v6covert/error.hpp"
#include "v6covert/features.hpp"

using namespace v6covert;
using namespace testsupport;

TEST_CASE("length delta") {
  auto p = udp_packet(addr(1, 1), addr(2, 2), 1, 2, 32);
  REQUIRE(p.payload.size() == 40);
  p.payload_length_declared = 77;
  const std::vector<Ipv6Packet> pkts{p};
  const auto f = extract_features(pkts)[0];
  CHECK(f[f_length_delta] == 37);
  CHECK(f[f_payload_length_declared] == 77);
  CHECK(f[f_payload_length_actual] == 40);
  CHECK(f[f_next_header_udp] == 1);
  CHECK(f[f_next_header_tcp] == 0);
}

TEST_CASE("iid entropy") {
  Ipv6Address a{};
  CHECK(iid_entropy(a) == 0.0);
  for (int k = 8; k < 16; ++k) a[k] = static_cast<std::uint8_t>(k * 17);
  CHECK(iid_entropy(a) == doctest::Approx(3.0).epsilon(1e-12));
  // Two values, four each: one bit.
  for (int k = 8; k < 16; ++k) a[k] = k % 2 ? 0xAA : 0x55;
  CHECK(iid_entropy(a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hop limit deviation from the flow mode") {
  std::vector<Ipv6Packet> pkts;
  for (std::uint8_t h : {57, 57, 57, 128}) {
    auto p = udp_packet(addr(1, 1), addr(2, 2), 9, 9);
    p.hop_limit = h;
    pkts.push_back(p);
  }
  const auto f = extract_features(pkts);
  CHECK(f[0][f_hop_limit_flow_deviation] == 0);
  CHECK(f[3][f_hop_limit_flow_deviation] == 71);
  CHECK(f[3][f_hop_limit] == 128);
}

TEST_CASE("tcp sequence discontinuity") {
  const auto a = addr(1, 1), b = addr(2, 2);
  const std::vector<Ipv6Packet> pkts{
      tcp_packet(a, b, 1, 2, 1000, 100),
      tcp_packet(a, b, 1, 2, 1100, 50),
      tcp_packet(a, b, 1, 2, 1, 0),
      tcp_packet(a, b, 1, 2, 1150, 0),
  };
  const auto f = extract_features(pkts);
  CHECK(f[0][f_tcp_seq_discontinuity] == 0);
  CHECK(f[1][f_tcp_seq_discontinuity] == 0);
  CHECK(f[2][f_tcp_seq_discontinuity] == 1);
  CHECK(f[3][f_tcp_seq_discontinuity] == 0);
}

TEST_CASE("icmp and flow label columns") {
  const auto a = addr(1, 1), b = addr(2, 2);
  auto err = icmp_packet(a, b, 1);
  err.flow_label = 0xABCDE;
  const std::vector<Ipv6Packet> pkts{err, icmp_packet(a, b, 128)};
  const auto f = extract_features(pkts);
  CHECK(f[0][f_is_icmpv6_error] == 1);
  CHECK(f[0][f_flow_label] == 0xABCDE);
  CHECK(f[0][f_flow_label_is_zero] == 0);
  CHECK(f[0][f_flow_label_flow_distinct] == 2);
  CHECK(f[1][f_is_icmpv6_error] == 0);
  CHECK(f[1][f_next_header_icmpv6] == 1);
  CHECK(f[1][f_flow_label_is_zero] == 1);
}

TEST_CASE("background traffic is self-consistent") {
  const auto bg = generate_background(5000, 42);
  const auto rows = extract_features(bg.packets);
  for (const auto& r : rows) {
    REQUIRE(r[f_length_delta] == 0);
    REQUIRE(r[f_tcp_seq_discontinuity] == 0);
  }
}

TEST_CASE("extraction is deterministic") {
  const auto bg = generate_background(800, 3);
  const auto a = extract_features(bg.packets);
  const auto b = extract_features(bg.packets);
  CHECK(format_feature_csv(a, bg.labels) == format_feature_csv(b, bg.labels));
}

TEST_CASE("normalization fit") {
  CHECK_THROWS_AS(fit_normalization({}), Error);
  FeatureVector v{};
  v[f_hop_limit] = 64;
  const std::vector<FeatureVector> one{v};
  const auto p1 = fit_normalization(one);
  CHECK(p1.min == p1.max);

  FeatureVector lo{}, hi{};
  hi[f_hop_limit] = 255;
  const std::vector<FeatureVector> two{lo, hi};
  const auto p = fit_normalization(two);
  CHECK(p.min[f_hop_limit] == 0);
  CHECK(p.max[f_hop_limit] == 255);
}

TEST_CASE("normalization apply") {
  FeatureVector lo{}, hi{};
  lo[f_hop_limit] = 10;
  hi[f_hop_limit] = 20;
  hi[f_next_header_tcp] = 1;
  lo[f_dscp] = hi[f_dscp] = 7;
  const std::vector<FeatureVector> train{lo, hi};
  const auto params = fit_normalization(train);

  FeatureVector probe_hi = hi, probe_far = hi, probe_neg = lo;
  probe_far[f_hop_limit] = 100;
  probe_neg[f_hop_limit] = -100;
  const std::vector<FeatureVector> probe{lo, hi, probe_far, probe_neg};
  const auto out = apply_normalization(probe, params);
  CHECK(out[0][f_hop_limit] == 0);
  CHECK(out[1][f_hop_limit] == 1);
  CHECK(out[2][f_hop_limit] == 2);
  CHECK(out[3][f_hop_limit] == -1);
  CHECK(out[0][f_dscp] == 0);
  CHECK(out[1][f_dscp] == 0);
  CHECK(out[1][f_next_header_tcp] == 1);
}

TEST_CASE("csv format") {
  CHECK(format_feature_value(1.0) == "1");
  CHECK(format_feature_value(0.5) == "0.5");
  CHECK(format_feature_value(-0.0) == "0");
  CHECK(format_feature_value(2.0 / 3.0) == "0.666667");
  const std::string header = format_feature_csv({}, {});
  CHECK(std::count(header.begin(), header.end(), '\n') == 1);
  CHECK(header.rfind("dscp,ecn,flow_label,", 0) == 0);
  CHECK(parse_feature_csv(header).rows.empty());
}

TEST_CASE("csv round trip") {
  MixConfig mix;
  mix.normal_count = 400;
  mix.set_count(ChannelKind::hop_limit, 30);
  mix.set_count(ChannelKind::address, 8);
  mix.set_count(ChannelKind::length, 8);
  mix.set_count(ChannelKind::flow_label, 8);
  const auto cap = build_mixed_dataset(mix, SharedSecret::make(bytes_of("k")));
  const auto rows = extract_features(cap.packets);
  const std::string text = format_feature_csv(rows, cap.labels);
  const auto table = parse_feature_csv(text);
  CHECK(table.labels == cap.labels);
  REQUIRE(table.rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      REQUIRE(std::abs(table.rows[i][f] - rows[i][f]) <= 5e-7);
    }
  }
  CHECK(format_feature_csv(table.rows, table.labels) == text);

  const auto path = std::filesystem::temp_directory_path() / "v6covert_features.csv";
  write_feature_csv(rows, cap.labels, path);
  CHECK(read_feature_csv(path).labels == cap.labels);
  std::filesystem::remove(path);
}

TEST_CASE("csv errors carry a line number") {
  std::string text = format_feature_csv({}, {});
  text += "1,2,3\n";
  try {
    parse_feature_csv(text);
    FAIL("short row accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::csv_parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::string bad_label = format_feature_csv({}, {});
  bad_label += "0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,weird\n";
  CHECK_THROWS_AS(parse_feature_csv(bad_label), Error);
  CHECK_THROWS_AS(parse_feature_csv("a,b\n"), Error);
  CHECK_THROWS_AS(parse_feature_csv(""), Error);
}
