#include "v6covert/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "v6covert/error.hpp"

namespace v6covert {

const std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "dscp",
    "ecn",
    "flow_label",
    "flow_label_is_zero",
    "flow_label_flow_distinct",
    "payload_length_declared",
    "payload_length_actual",
    "length_delta",
    "hop_limit",
    "hop_limit_flow_deviation",
    "next_header_tcp",
    "next_header_udp",
    "next_header_icmpv6",
    "next_header_other",
    "is_icmpv6_error",
    "src_iid_entropy",
    "tcp_seq_discontinuity",
};

bool is_indicator_feature(std::size_t feature) {
  switch (feature) {
    case f_flow_label_is_zero:
    case f_next_header_tcp:
    case f_next_header_udp:
    case f_next_header_icmpv6:
    case f_next_header_other:
    case f_is_icmpv6_error:
    case f_tcp_seq_discontinuity:
      return true;
    default:
      return false;
  }
}

double iid_entropy(const Ipv6Address& address) {
  std::array<int, 256> counts{};
  for (std::size_t k = 8; k < 16; ++k) ++counts[address[k]];
  double h = 0.0;
  for (const int c : counts) {
    if (c == 0) continue;
    const double p = c / 8.0;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<FeatureVector> extract_features(std::span<const Ipv6Packet> packets, const FlowTable& flows) {
  if (flows.packet_count() != packets.size()) {
    throw Error(Errc::invalid_argument, "flow table was built from a different capture");
  }
  std::vector<FeatureVector> out(packets.size());
  // Highest sequence end seen so far, per flow.
  std::vector<std::optional<std::uint32_t>> expected(flows.size());

  for (std::size_t i = 0; i < packets.size(); ++i) {
    const Ipv6Packet& p = packets[i];
    const std::size_t flow_index = flows.flow_index_of(i);
    const FlowRecord& flow = flows.flows()[flow_index];
    FeatureVector& v = out[i];
    v.fill(0.0);

    v[f_dscp] = p.dscp();
    v[f_ecn] = p.ecn();
    v[f_flow_label] = p.flow_label;
    v[f_flow_label_is_zero] = p.flow_label == 0 ? 1.0 : 0.0;
    v[f_flow_label_flow_distinct] = static_cast<double>(flow.distinct_flow_labels.size());
    v[f_payload_length_declared] = p.payload_length_declared;
    v[f_payload_length_actual] = static_cast<double>(p.payload.size());
    v[f_length_delta] = static_cast<double>(p.payload_length_declared) - static_cast<double>(p.payload.size());
    v[f_hop_limit] = p.hop_limit;
    v[f_hop_limit_flow_deviation] = std::abs(int{p.hop_limit} - int{flow.hop_limit_mode});

    switch (p.next_header) {
      case kProtoTcp: v[f_next_header_tcp] = 1.0; break;
      case kProtoUdp: v[f_next_header_udp] = 1.0; break;
      case kProtoIcmpv6: v[f_next_header_icmpv6] = 1.0; break;
      default: v[f_next_header_other] = 1.0; break;
    }
    v[f_is_icmpv6_error] = is_icmpv6_error(p) ? 1.0 : 0.0;
    v[f_src_iid_entropy] = iid_entropy(p.src);

    if (const auto tcp = parse_tcp(p)) {
      auto& next = expected[flow_index];
      if (next && tcp->seq != *next) v[f_tcp_seq_discontinuity] = 1.0;
      const std::uint32_t end = tcp->seq + tcp->sequence_length;
      if (!next || seq_after(end, *next)) next = end;
    }
  }
  return out;
}

std::vector<FeatureVector> extract_features(std::span<const Ipv6Packet> packets) {
  return extract_features(packets, build_flow_table(packets));
}

NormalizationParams fit_normalization(std::span<const FeatureVector> train) {
  if (train.empty()) throw Error(Errc::invalid_argument, "cannot fit normalization on an empty set");
  NormalizationParams params;
  params.min = train.front();
  params.max = train.front();
  for (const auto& row : train) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      params.min[f] = std::min(params.min[f], row[f]);
      params.max[f] = std::max(params.max[f], row[f]);
    }
  }
  return params;
}

std::vector<FeatureVector> apply_normalization(std::span<const FeatureVector> rows,
                                               const NormalizationParams& params) {
  std::vector<FeatureVector> out(rows.begin(), rows.end());
  for (auto& row : out) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (is_indicator_feature(f)) continue;
      const double span = params.max[f] - params.min[f];
      row[f] = span > 0 ? std::clamp((row[f] - params.min[f]) / span, -1.0, 2.0) : 0.0;
    }
  }
  return out;
}

// ---- CSV -------------------------------------------------------------------

std::string format_feature_value(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string format_feature_csv(std::span<const FeatureVector> rows, std::span<const ChannelKind> labels) {
  if (rows.size() != labels.size()) {
    throw Error(Errc::invalid_argument, "feature rows and labels differ in count");
  }
  std::string out;
  for (const auto name : kFeatureNames) {
    out += name;
    out += ',';
  }
  out += "label\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const double x : rows[i]) {
      out += format_feature_value(x);
      out += ',';
    }
    out += channel_name(labels[i]);
    out += '\n';
  }
  return out;
}

FeatureTable parse_feature_csv(std::string_view text) {
  FeatureTable table;
  std::size_t line_number = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fail = [&](const std::string& why) {
      throw Error(Errc::csv_parse, "line " + std::to_string(line_number) + ": " + why);
    };

    std::vector<std::string_view> cells;
    for (std::size_t start = 0;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!header_seen) {
      if (cells.size() != kFeatureCount + 1) fail("expected " + std::to_string(kFeatureCount + 1) + " columns");
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (cells[f] != kFeatureNames[f]) fail("unexpected column '" + std::string(cells[f]) + "'");
      }
      if (cells.back() != "label") fail("last column must be 'label'");
      header_seen = true;
      continue;
    }
    if (line.empty() && text.empty()) break;
    if (cells.size() != kFeatureCount + 1) {
      fail("expected " + std::to_string(kFeatureCount + 1) + " columns, got " + std::to_string(cells.size()));
    }
    FeatureVector row{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const std::string cell(cells[f]);
      char* end = nullptr;
      row[f] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(row[f])) {
        fail("bad number in column " + std::string(kFeatureNames[f]));
      }
    }
    const auto label = parse_channel(cells.back());
    if (!label) fail("unknown label '" + std::string(cells.back()) + "'");
    table.rows.push_back(row);
    table.labels.push_back(*label);
  }
  if (!header_seen) throw Error(Errc::csv_parse, "line 1: missing header");
  return table;
}

void write_feature_csv(std::span<const FeatureVector> rows, std::span<const ChannelKind> labels,
                       const std::filesystem::path& path) {
  const std::string text = format_feature_csv(rows, labels);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_feature_csv(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace v6covert
