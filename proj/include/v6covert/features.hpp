#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "v6covert/channels.hpp"
#include "v6covert/flow_table.hpp"
#include "v6covert/pcap_io.hpp"

namespace v6covert {

// Column order of every feature vector and of the feature CSV.
enum Feature : std::size_t {
  f_dscp,
  f_ecn,
  f_flow_label,
  f_flow_label_is_zero,
  f_flow_label_flow_distinct,
  f_payload_length_declared,
  f_payload_length_actual,
  f_length_delta,
  f_hop_limit,
  f_hop_limit_flow_deviation,
  f_next_header_tcp,
  f_next_header_udp,
  f_next_header_icmpv6,
  f_next_header_other,
  f_is_icmpv6_error,
  f_src_iid_entropy,
  f_tcp_seq_discontinuity,
  kFeatureCount
};

extern const std::array<std::string_view, kFeatureCount> kFeatureNames;

using FeatureVector = std::array<double, kFeatureCount>;

// 0/1 and one-of-k columns; normalization leaves them alone.
bool is_indicator_feature(std::size_t feature);

// Shannon entropy in bits per byte of address bytes 8..15.
double iid_entropy(const Ipv6Address& address);

// One vector per packet, in capture order. `flows` must be built from the
// same packets.
std::vector<FeatureVector> extract_features(std::span<const Ipv6Packet> packets, const FlowTable& flows);
std::vector<FeatureVector> extract_features(std::span<const Ipv6Packet> packets);

struct NormalizationParams {
  FeatureVector min{};
  FeatureVector max{};
};

// Throws Error{invalid_argument} on empty input.
NormalizationParams fit_normalization(std::span<const FeatureVector> train);
// (x - min) / (max - min), clamped to [-1, 2]; constant columns become 0.
std::vector<FeatureVector> apply_normalization(std::span<const FeatureVector> rows,
                                               const NormalizationParams& params);

struct FeatureTable {
  std::vector<FeatureVector> rows;
  std::vector<ChannelKind> labels;
};

// Shortest decimal with at most 6 fractional digits.
std::string format_feature_value(double value);
std::string format_feature_csv(std::span<const FeatureVector> rows, std::span<const ChannelKind> labels);
FeatureTable parse_feature_csv(std::string_view text);

void write_feature_csv(std::span<const FeatureVector> rows, std::span<const ChannelKind> labels,
                       const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace v6covert
