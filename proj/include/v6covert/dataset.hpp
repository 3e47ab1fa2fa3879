#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "v6covert/channels.hpp"
#include "v6covert/crypto.hpp"
#include "v6covert/pcap_io.hpp"

namespace v6covert {

enum class Provenance : std::uint8_t { background, inserted, modulated };

std::string_view provenance_name(Provenance provenance);
std::optional<Provenance> parse_provenance(std::string_view name);

// Packets with a parallel label and provenance per packet. A label is
// `normal` exactly when the provenance is `background`.
struct LabeledCapture {
  std::vector<Ipv6Packet> packets;
  std::vector<ChannelKind> labels;
  std::vector<Provenance> provenance;
  // Hop limit before modulation, for `modulated` packets only.
  std::vector<std::optional<std::uint8_t>> original_hop_limit;

  static LabeledCapture from_background(std::vector<Ipv6Packet> packets);

  std::size_t size() const { return packets.size(); }
  void push_back(Ipv6Packet packet, ChannelKind label, Provenance origin,
                 std::optional<std::uint8_t> original_hop = std::nullopt);
  // Throws Error{invalid_argument} when an invariant is violated.
  void validate() const;
  std::array<std::size_t, kChannelKindCount> label_histogram() const;
};

struct MixConfig {
  std::size_t normal_count = 0;
  std::array<std::size_t, kChannelKindCount> covert_counts{};  // indexed by ChannelKind; [normal] unused
  std::uint64_t seed = 42;
  std::size_t min_message_bytes = 8;
  std::size_t max_message_bytes = 64;

  std::size_t count(ChannelKind kind) const {
    return kind == ChannelKind::normal ? normal_count : covert_counts[static_cast<std::size_t>(kind)];
  }
  void set_count(ChannelKind kind, std::size_t n);
  std::size_t total() const;

  // key=value lines: normal, hoplimit, address, length, flowlabel, seed,
  // min_message, max_message. '#' starts a comment.
  static MixConfig parse(std::string_view text);
  static MixConfig load(const std::filesystem::path& path);
  std::string to_text() const;
};

// Training-packet counts of the reference dataset divided by 100:
// normal 4117, hoplimit 1166, address 766, length 758, flowlabel 447.
MixConfig desk_scale_mix(std::uint64_t seed = 42);

// Synthetic IPv6 background traffic: interleaved TCP sessions, UDP
// exchanges, ICMPv6 echo sessions and ICMPv6 error messages, time-ordered.
LabeledCapture generate_background(std::size_t packet_count, std::uint64_t seed);
inline LabeledCapture generate_background(const MixConfig& config) {
  return generate_background(config.normal_count, config.seed);
}

struct InjectOptions {
  std::uint64_t seed = 42;
  HopLimitMode hop_limit_mode = HopLimitMode::binary;
};

struct Injection {
  LabeledCapture capture;
  std::vector<std::size_t> carriers;  // positions in `capture`, in message order
};

// Embeds one message into the capture through `channel`:
//   flowlabel  new UDP / ICMPv6-error packets inside an existing such flow
//   length     new TCP segments inside an existing TCP flow, continuing its
//              sequence numbers
//   address    standalone UDP packets at random positions
//   hoplimit   in-place modulation of an existing flow's packets
// Throws Error{injection_infeasible} when no eligible flow exists.
Injection inject(const LabeledCapture& capture, ChannelKind channel, ByteView message,
                 const SharedSecret& secret, const InjectOptions& options = {});

// Background plus covert traffic whose label histogram equals `config`.
LabeledCapture build_mixed_dataset(const MixConfig& config, const SharedSecret& secret);

// First floor(n * train_fraction) packets train, the rest test; no shuffling.
std::pair<LabeledCapture, LabeledCapture> split_sequential(const LabeledCapture& capture,
                                                           double train_fraction = 0.75);
std::size_t train_size(std::size_t n, double train_fraction);

// Sidecar label file: "packet_index,label,provenance".
void write_label_csv(const LabeledCapture& capture, const std::filesystem::path& path);
// Attaches labels read from `path` to `packets`.
LabeledCapture read_label_csv(std::vector<Ipv6Packet> packets, const std::filesystem::path& path);

}  // namespace v6covert
