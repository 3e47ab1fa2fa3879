#include "v6covert/flow_table.hpp"

#include <array>

namespace v6covert {

FlowKey flow_key_of(const Ipv6Packet& packet) {
  FlowKey key{packet.src, packet.dst, packet.next_header, std::nullopt, std::nullopt};
  if (const auto ports = transport_ports(packet)) {
    key.src_port = ports->src;
    key.dst_port = ports->dst;
  }
  return key;
}

const FlowRecord* FlowTable::find(const FlowKey& key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : &flows_[it->second];
}

FlowTable build_flow_table(std::span<const Ipv6Packet> packets) {
  FlowTable table;
  table.packet_flow_.reserve(packets.size());
  std::vector<std::array<std::uint32_t, 256>> hop_counts;

  for (std::size_t i = 0; i < packets.size(); ++i) {
    const Ipv6Packet& packet = packets[i];
    FlowKey key = flow_key_of(packet);
    auto [it, inserted] = table.index_.try_emplace(key, table.flows_.size());
    if (inserted) {
      table.flows_.push_back(FlowRecord{std::move(key), {}, std::nullopt, {}, 0});
      hop_counts.push_back({});
    }
    const std::size_t flow_index = it->second;
    FlowRecord& flow = table.flows_[flow_index];
    flow.packet_indices.push_back(i);
    flow.distinct_flow_labels.insert(packet.flow_label);
    ++hop_counts[flow_index][packet.hop_limit];
    if (const auto tcp = parse_tcp(packet)) {
      const std::uint32_t end = tcp->seq + tcp->sequence_length;
      if (!flow.last_tcp_seq || seq_after(end, *flow.last_tcp_seq)) {
        flow.last_tcp_seq = end;
      }
    }
    table.packet_flow_.push_back(flow_index);
  }

  for (std::size_t f = 0; f < table.flows_.size(); ++f) {
    const auto& counts = hop_counts[f];
    std::size_t best = 0;
    for (std::size_t v = 1; v < counts.size(); ++v) {
      if (counts[v] > counts[best]) best = v;
    }
    table.flows_[f].hop_limit_mode = static_cast<std::uint8_t>(best);
  }
  return table;
}

}  // namespace v6covert
