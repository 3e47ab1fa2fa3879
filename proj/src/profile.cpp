#include "v6covert/profile.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "v6covert/error.hpp"

namespace v6covert {

std::string_view protocol_class_name(ProtocolClass c) {
  switch (c) {
    case ProtocolClass::tcp: return "tcp";
    case ProtocolClass::udp: return "udp";
    case ProtocolClass::icmpv6_echo: return "icmpv6-echo";
    case ProtocolClass::icmpv6_error: return "icmpv6-error";
    case ProtocolClass::other: return "other";
  }
  return "other";
}

ProtocolClass protocol_class_of(const Ipv6Packet& packet) {
  if (packet.next_header == kProtoTcp) return ProtocolClass::tcp;
  if (packet.next_header == kProtoUdp) return ProtocolClass::udp;
  if (is_icmpv6_echo(packet)) return ProtocolClass::icmpv6_echo;
  if (is_icmpv6_error(packet)) return ProtocolClass::icmpv6_error;
  return ProtocolClass::other;
}

double ProfileReport::hop_limit_cluster_mass() const {
  if (packet_count == 0) return 0.0;
  std::size_t inside = 0;
  for (std::size_t v = 0; v < 256; ++v) {
    if ((v >= 48 && v <= 60) || (v >= 109 && v <= 114) || v >= 233) inside += hop_limit_histogram[v];
  }
  return static_cast<double>(inside) / static_cast<double>(packet_count);
}

ProfileReport profile_capture(std::span<const Ipv6Packet> packets, const FlowTable& flows) {
  if (flows.packet_count() != packets.size()) {
    throw Error(Errc::invalid_argument, "flow table was built from a different capture");
  }
  ProfileReport report;
  report.packet_count = packets.size();
  std::array<std::map<std::uint32_t, std::size_t>, kProtocolClassCount> values;
  std::array<std::size_t, kProtocolClassCount> zeros{};

  for (const Ipv6Packet& p : packets) {
    ++report.hop_limit_histogram[p.hop_limit];
    ++report.dscp_histogram[p.dscp()];
    ++report.ecn_histogram[p.ecn()];
    const auto c = static_cast<std::size_t>(protocol_class_of(p));
    ++report.flowlabel_stats[c].packets;
    ++values[c][p.flow_label];
    if (p.flow_label == 0) ++zeros[c];
  }

  std::array<std::size_t, kProtocolClassCount> constant{};
  for (const FlowRecord& flow : flows.flows()) {
    const auto c = static_cast<std::size_t>(protocol_class_of(packets[flow.packet_indices.front()]));
    ++report.flowlabel_stats[c].flows;
    if (flow.distinct_flow_labels.size() == 1) ++constant[c];
  }

  for (std::size_t c = 0; c < kProtocolClassCount; ++c) {
    FlowLabelStats& s = report.flowlabel_stats[c];
    if (s.packets > 0) s.fraction_zero = static_cast<double>(zeros[c]) / static_cast<double>(s.packets);
    if (s.flows > 0) s.fraction_constant_per_flow = static_cast<double>(constant[c]) / static_cast<double>(s.flows);
    s.distinct_values = values[c].size();
    for (const auto& [label, count] : values[c]) {
      const double q = static_cast<double>(count) / static_cast<double>(s.packets);
      s.entropy_bits -= q * std::log2(q);
    }
  }
  return report;
}

ProfileReport profile_capture(std::span<const Ipv6Packet> packets) {
  return profile_capture(packets, build_flow_table(packets));
}

std::string ProfileReport::summary() const {
  std::string out;
  char line[200];
  std::snprintf(line, sizeof line, "packets: %zu\n", packet_count);
  out += line;
  std::snprintf(line, sizeof line, "hop-limit mass in [48,60] u [109,114] u [233,255]: %.4f\n", hop_limit_cluster_mass());
  out += line;
  const double dscp0 = packet_count ? static_cast<double>(dscp_histogram[0]) / static_cast<double>(packet_count) : 0.0;
  std::snprintf(line, sizeof line, "dscp 0 share: %.4f\n", dscp0);
  out += line;
  out += "flow labels:\n";
  for (std::size_t c = 0; c < kProtocolClassCount; ++c) {
    const FlowLabelStats& s = flowlabel_stats[c];
    const auto name = protocol_class_name(static_cast<ProtocolClass>(c));
    std::snprintf(line, sizeof line,
                  "  %-13.*s packets %-7zu flows %-6zu zero %.4f constant/flow %.4f distinct %-7zu entropy %.3f bits\n",
                  static_cast<int>(name.size()), name.data(), s.packets, s.flows, s.fraction_zero,
                  s.fraction_constant_per_flow, s.distinct_values, s.entropy_bits);
    out += line;
  }
  return out;
}

namespace {

template <std::size_t N>
void write_histogram(const std::array<std::size_t, N>& histogram, std::string_view column,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << column << ",count\n";
  for (std::size_t v = 0; v < N; ++v) out << v << ',' << histogram[v] << '\n';
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

}  // namespace

void write_profile(const ProfileReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  write_histogram(report.hop_limit_histogram, "hop_limit", dir / "hop_limit.csv");
  write_histogram(report.dscp_histogram, "dscp", dir / "dscp.csv");
  write_histogram(report.ecn_histogram, "ecn", dir / "ecn.csv");

  std::ofstream fl(dir / "flowlabel.csv", std::ios::trunc);
  if (!fl) throw Error(Errc::io, "cannot write flowlabel.csv in " + dir.string());
  fl << "class,packets,flows,fraction_zero,fraction_constant_per_flow,distinct_values,entropy_bits\n";
  char line[200];
  for (std::size_t c = 0; c < kProtocolClassCount; ++c) {
    const FlowLabelStats& s = report.flowlabel_stats[c];
    const auto name = protocol_class_name(static_cast<ProtocolClass>(c));
    std::snprintf(line, sizeof line, "%.*s,%zu,%zu,%.6f,%.6f,%zu,%.6f\n", static_cast<int>(name.size()), name.data(),
                  s.packets, s.flows, s.fraction_zero, s.fraction_constant_per_flow, s.distinct_values,
                  s.entropy_bits);
    fl << line;
  }
  std::ofstream summary(dir / "summary.txt", std::ios::trunc);
  summary << report.summary();
  if (!fl || !summary) throw Error(Errc::io, "write failed in " + dir.string());
}

}  // namespace v6covert
