#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "v6covert/flow_table.hpp"
#include "v6covert/pcap_io.hpp"

namespace v6covert {

enum class ProtocolClass : std::size_t { tcp, udp, icmpv6_echo, icmpv6_error, other };
inline constexpr std::size_t kProtocolClassCount = 5;

std::string_view protocol_class_name(ProtocolClass c);
ProtocolClass protocol_class_of(const Ipv6Packet& packet);

struct FlowLabelStats {
  std::size_t packets = 0;
  std::size_t flows = 0;
  double fraction_zero = 0.0;               // of packets
  double fraction_constant_per_flow = 0.0;  // of flows with a single distinct label
  std::size_t distinct_values = 0;
  double entropy_bits = 0.0;  // Shannon entropy of the label values
};

struct ProfileReport {
  std::size_t packet_count = 0;
  std::array<std::size_t, 256> hop_limit_histogram{};
  std::array<std::size_t, 64> dscp_histogram{};
  std::array<std::size_t, 4> ecn_histogram{};
  std::array<FlowLabelStats, kProtocolClassCount> flowlabel_stats{};

  // Share of packets whose hop limit lies in [48,60], [109,114] or [233,255].
  double hop_limit_cluster_mass() const;
  std::string summary() const;
};

// A flow is classified by its first packet.
ProfileReport profile_capture(std::span<const Ipv6Packet> packets, const FlowTable& flows);
ProfileReport profile_capture(std::span<const Ipv6Packet> packets);

// hop_limit.csv, dscp.csv, ecn.csv, flowlabel.csv and summary.txt.
void write_profile(const ProfileReport& report, const std::filesystem::path& dir);

}  // namespace v6covert
