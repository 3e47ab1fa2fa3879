#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "v6covert/pcap_io.hpp"

namespace v6covert {

// Direction-sensitive 5-tuple. Ports are present only for TCP/UDP packets
// carrying at least 4 payload bytes.
struct FlowKey {
  Ipv6Address src{};
  Ipv6Address dst{};
  std::uint8_t next_header = 0;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;

  auto operator<=>(const FlowKey&) const = default;
};

FlowKey flow_key_of(const Ipv6Packet& packet);

struct FlowRecord {
  FlowKey key;
  std::vector<std::size_t> packet_indices;  // strictly increasing capture positions
  std::optional<std::uint32_t> last_tcp_seq;
  std::set<std::uint32_t> distinct_flow_labels;
  std::uint8_t hop_limit_mode = 0;
};

class FlowTable {
 public:
  FlowTable() = default;

  // Flows in order of first appearance in the capture.
  const std::vector<FlowRecord>& flows() const { return flows_; }
  std::size_t size() const { return flows_.size(); }
  std::size_t packet_count() const { return packet_flow_.size(); }

  std::size_t flow_index_of(std::size_t packet_index) const { return packet_flow_.at(packet_index); }
  const FlowRecord& flow_of(std::size_t packet_index) const { return flows_[flow_index_of(packet_index)]; }
  const FlowRecord* find(const FlowKey& key) const;

 private:
  friend FlowTable build_flow_table(std::span<const Ipv6Packet> packets);

  std::vector<FlowRecord> flows_;
  std::map<FlowKey, std::size_t> index_;
  std::vector<std::size_t> packet_flow_;
};

FlowTable build_flow_table(std::span<const Ipv6Packet> packets);

}  // namespace v6covert
