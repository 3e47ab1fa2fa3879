#include "v6covert/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "v6covert/error.hpp"
#include "v6covert/flow_table.hpp"
#include "v6covert/rng.hpp"

namespace v6covert {

// ---- LabeledCapture --------------------------------------------------------

std::string_view provenance_name(Provenance provenance) {
  switch (provenance) {
    case Provenance::background: return "background";
    case Provenance::inserted: return "inserted";
    case Provenance::modulated: return "modulated";
  }
  return "background";
}

std::optional<Provenance> parse_provenance(std::string_view name) {
  if (name == "background") return Provenance::background;
  if (name == "inserted") return Provenance::inserted;
  if (name == "modulated") return Provenance::modulated;
  return std::nullopt;
}

LabeledCapture LabeledCapture::from_background(std::vector<Ipv6Packet> packets) {
  LabeledCapture capture;
  const std::size_t n = packets.size();
  capture.packets = std::move(packets);
  capture.labels.assign(n, ChannelKind::normal);
  capture.provenance.assign(n, Provenance::background);
  capture.original_hop_limit.assign(n, std::nullopt);
  return capture;
}

void LabeledCapture::push_back(Ipv6Packet packet, ChannelKind label, Provenance origin,
                               std::optional<std::uint8_t> original_hop) {
  packets.push_back(std::move(packet));
  labels.push_back(label);
  provenance.push_back(origin);
  original_hop_limit.push_back(original_hop);
}

void LabeledCapture::validate() const {
  if (labels.size() != packets.size() || provenance.size() != packets.size() ||
      original_hop_limit.size() != packets.size()) {
    throw Error(Errc::invalid_argument, "labeled capture columns differ in length");
  }
  for (std::size_t i = 0; i < packets.size(); ++i) {
    if ((labels[i] == ChannelKind::normal) != (provenance[i] == Provenance::background)) {
      throw Error(Errc::invalid_argument,
                  "packet " + std::to_string(i) + ": label normal must coincide with background provenance");
    }
  }
}

std::array<std::size_t, kChannelKindCount> LabeledCapture::label_histogram() const {
  std::array<std::size_t, kChannelKindCount> histogram{};
  for (const auto label : labels) ++histogram[static_cast<std::size_t>(label)];
  return histogram;
}

// ---- MixConfig -------------------------------------------------------------

void MixConfig::set_count(ChannelKind kind, std::size_t n) {
  if (kind == ChannelKind::normal) {
    normal_count = n;
  } else {
    covert_counts[static_cast<std::size_t>(kind)] = n;
  }
}

std::size_t MixConfig::total() const {
  std::size_t sum = normal_count;
  for (const auto kind : kCovertChannels) sum += count(kind);
  return sum;
}

MixConfig MixConfig::parse(std::string_view text) {
  MixConfig config;
  std::size_t line_number = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::config_parse, "line " + std::to_string(line_number) + ": expected key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    std::uint64_t number = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), number);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw Error(Errc::config_parse,
                  "line " + std::to_string(line_number) + ": value of '" + std::string(key) +
                      "' is not a non-negative integer");
    }
    if (key == "seed") {
      config.seed = number;
    } else if (key == "min_message") {
      config.min_message_bytes = number;
    } else if (key == "max_message") {
      config.max_message_bytes = number;
    } else if (const auto kind = parse_channel(key)) {
      config.set_count(*kind, number);
    } else {
      throw Error(Errc::config_parse,
                  "line " + std::to_string(line_number) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (config.min_message_bytes == 0 || config.min_message_bytes > config.max_message_bytes) {
    throw Error(Errc::config_parse, "min_message must be >= 1 and <= max_message");
  }
  return config;
}

MixConfig MixConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string MixConfig::to_text() const {
  std::ostringstream out;
  out << "normal=" << normal_count << '\n';
  for (const auto kind : kCovertChannels) out << channel_name(kind) << '=' << count(kind) << '\n';
  out << "seed=" << seed << '\n'
      << "min_message=" << min_message_bytes << '\n'
      << "max_message=" << max_message_bytes << '\n';
  return out.str();
}

MixConfig desk_scale_mix(std::uint64_t seed) {
  MixConfig config;
  config.normal_count = 4117;
  config.set_count(ChannelKind::hop_limit, 1166);
  config.set_count(ChannelKind::address, 766);
  config.set_count(ChannelKind::length, 758);
  config.set_count(ChannelKind::flow_label, 447);
  config.seed = seed;
  return config;
}

// ---- background generator --------------------------------------------------

namespace {

constexpr std::uint64_t kCaptureEpochMicros = 1547078400ULL * 1'000'000;  // 2019-01-10 UTC
constexpr std::uint64_t kMicrosPerPacket = 1200;                          // capture window per packet

void put_be16(Bytes& out, std::size_t at, std::uint16_t v) {
  out[at] = static_cast<std::uint8_t>(v >> 8);
  out[at + 1] = static_cast<std::uint8_t>(v);
}

void put_be32(Bytes& out, std::size_t at, std::uint32_t v) {
  out[at] = static_cast<std::uint8_t>(v >> 24);
  out[at + 1] = static_cast<std::uint8_t>(v >> 16);
  out[at + 2] = static_cast<std::uint8_t>(v >> 8);
  out[at + 3] = static_cast<std::uint8_t>(v);
}

std::uint16_t get_be16(const Bytes& in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] << 8 | in[at + 1]);
}

void fill_random(Rng& rng, Bytes& out, std::size_t from) {
  for (std::size_t k = from; k < out.size(); ++k) out[k] = rng.byte();
}

struct Host {
  Ipv6Address address{};
  std::uint8_t hop_limit = 64;  // as observed at the capture point
};

enum class IidStyle { low, eui64, privacy };

constexpr std::array<std::array<std::uint8_t, 3>, 6> kVendorOuis = {{
    {0x00, 0x1b, 0x21}, {0x00, 0x50, 0x56}, {0x3c, 0xfd, 0xfe},
    {0x00, 0x0c, 0x29}, {0xb8, 0x27, 0xeb}, {0x52, 0x54, 0x00},
}};

constexpr std::array<std::uint16_t, 5> kRegistryPrefixes = {0x2001, 0x2400, 0x2600, 0x2a00, 0x2804};

void write_iid(Rng& rng, IidStyle style, Ipv6Address& address) {
  std::fill(address.begin() + 8, address.end(), 0);
  switch (style) {
    case IidStyle::low: {
      const auto value = static_cast<std::uint16_t>(rng.range(1, 0x1FF));
      address[14] = static_cast<std::uint8_t>(value >> 8);
      address[15] = static_cast<std::uint8_t>(value);
      break;
    }
    case IidStyle::eui64: {
      const auto& oui = kVendorOuis[rng.below(kVendorOuis.size())];
      address[8] = oui[0] ^ 0x02;
      address[9] = oui[1];
      address[10] = oui[2];
      address[11] = 0xFF;
      address[12] = 0xFE;
      for (std::size_t k = 13; k < 16; ++k) address[k] = rng.byte();
      break;
    }
    case IidStyle::privacy:
      for (std::size_t k = 8; k < 16; ++k) address[k] = rng.byte();
      address[8] &= 0xFD;
      break;
  }
}

// Observed hop limit = OS default minus the path length to the monitor.
std::uint8_t draw_hop_limit(Rng& rng, int initial) {
  switch (initial) {
    case 64: return static_cast<std::uint8_t>(64 - rng.range(4, 16));    // 48..60
    case 128: return static_cast<std::uint8_t>(128 - rng.range(14, 19));  // 109..114
    default: return static_cast<std::uint8_t>(255 - rng.range(0, 22));    // 233..255
  }
}

int draw_initial_hop_limit(Rng& rng, double p64, double p128) {
  const double u = rng.unit();
  if (u < p64) return 64;
  if (u < p64 + p128) return 128;
  return 255;
}

std::uint8_t draw_traffic_class(Rng& rng, bool allow_ecn) {
  static constexpr std::array<std::uint8_t, 6> kDscps = {8, 10, 18, 26, 34, 46};
  const std::uint8_t dscp = rng.chance(0.93) ? 0 : kDscps[rng.below(kDscps.size())];
  const std::uint8_t ecn = (allow_ecn && rng.chance(0.1)) ? 2 : 0;
  return static_cast<std::uint8_t>(dscp << 2 | ecn);
}

std::uint32_t random_label(Rng& rng) { return static_cast<std::uint32_t>(rng.range(1, 0xFFFFF)); }

class BackgroundGenerator {
 public:
  BackgroundGenerator(std::size_t target, std::uint64_t seed)
      : target_(target), rng_(mix_seed(seed, 0xB6)), window_us_(std::max<std::uint64_t>(1, target) * kMicrosPerPacket) {
    build_hosts();
  }

  std::vector<Ipv6Packet> run() {
    std::size_t session = 0;
    while (emitted_.size() < target_) {
      const std::uint64_t start = rng_.below(window_us_);
      const double u = rng_.unit();
      session_ = session++;
      order_ = 0;
      if (u < 0.42) {
        tcp_session(start);
      } else if (u < 0.80) {
        udp_session(start);
      } else if (u < 0.92) {
        echo_session(start);
      } else {
        error_burst(start);
      }
    }
    std::sort(emitted_.begin(), emitted_.end(), [](const Stamped& a, const Stamped& b) {
      return std::tie(a.time_us, a.session, a.order) < std::tie(b.time_us, b.session, b.order);
    });
    emitted_.resize(target_);
    std::vector<Ipv6Packet> packets;
    packets.reserve(emitted_.size());
    for (Stamped& s : emitted_) {
      s.packet.timestamp = Timestamp::from_micros(kCaptureEpochMicros + s.time_us);
      packets.push_back(std::move(s.packet));
    }
    return packets;
  }

 private:
  struct Stamped {
    std::uint64_t time_us;
    std::size_t session;
    std::size_t order;
    Ipv6Packet packet;
  };

  void build_hosts() {
    const std::size_t sites = 24 + target_ / 150;
    std::vector<std::array<std::uint8_t, 8>> prefixes(sites);
    for (auto& prefix : prefixes) {
      const std::uint16_t registry = kRegistryPrefixes[rng_.below(kRegistryPrefixes.size())];
      prefix[0] = static_cast<std::uint8_t>(registry >> 8);
      prefix[1] = static_cast<std::uint8_t>(registry);
      for (std::size_t k = 2; k < 8; ++k) prefix[k] = rng_.byte();
    }
    auto make_host = [&](IidStyle style, int initial) {
      Host host;
      const auto& prefix = prefixes[rng_.below(prefixes.size())];
      std::copy(prefix.begin(), prefix.end(), host.address.begin());
      write_iid(rng_, style, host.address);
      host.hop_limit = draw_hop_limit(rng_, initial);
      return host;
    };
    const std::size_t server_count = 16 + target_ / 120;
    const std::size_t client_count = 40 + target_ / 40;
    const std::size_t router_count = 8 + target_ / 800;
    for (std::size_t k = 0; k < server_count; ++k) {
      const auto style = rng_.chance(0.7) ? IidStyle::low : IidStyle::eui64;
      servers_.push_back(make_host(style, draw_initial_hop_limit(rng_, 0.80, 0.05)));
    }
    for (std::size_t k = 0; k < client_count; ++k) {
      const auto style = rng_.chance(0.6) ? IidStyle::privacy : IidStyle::eui64;
      clients_.push_back(make_host(style, draw_initial_hop_limit(rng_, 0.45, 0.50)));
    }
    for (std::size_t k = 0; k < router_count; ++k) {
      routers_.push_back(make_host(IidStyle::low, draw_initial_hop_limit(rng_, 0.70, 0.0)));
    }
  }

  const Host& pick(const std::vector<Host>& hosts) { return hosts[rng_.below(hosts.size())]; }

  std::uint16_t ephemeral_port() { return static_cast<std::uint16_t>(rng_.range(49152, 65535)); }

  void emit(std::uint64_t time_us, const Host& from, const Host& to, std::uint8_t next_header,
            std::uint8_t traffic_class, std::uint32_t flow_label, Bytes payload) {
    Ipv6Packet packet;
    packet.traffic_class = traffic_class;
    packet.flow_label = flow_label;
    packet.next_header = next_header;
    packet.hop_limit = from.hop_limit;
    packet.src = from.address;
    packet.dst = to.address;
    packet.payload = std::move(payload);
    packet.payload_length_declared = static_cast<std::uint16_t>(packet.payload.size());
    refresh_l4_checksum(packet);
    emitted_.push_back({time_us, session_, order_++, std::move(packet)});
  }

  Bytes tcp_payload(std::uint16_t sport, std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                    std::uint8_t flags, std::uint16_t window, std::size_t data_len) {
    Bytes p(20 + data_len, 0);
    put_be16(p, 0, sport);
    put_be16(p, 2, dport);
    put_be32(p, 4, seq);
    put_be32(p, 8, ack);
    p[12] = 5 << 4;
    p[13] = flags;
    put_be16(p, 14, window);
    fill_random(rng_, p, 20);
    return p;
  }

  Bytes udp_payload(std::uint16_t sport, std::uint16_t dport, std::size_t data_len) {
    Bytes p(8 + data_len, 0);
    put_be16(p, 0, sport);
    put_be16(p, 2, dport);
    put_be16(p, 4, static_cast<std::uint16_t>(p.size()));
    fill_random(rng_, p, 8);
    return p;
  }

  std::uint32_t tcp_label() { return rng_.chance(0.7) ? 0 : random_label(rng_); }

  void tcp_session(std::uint64_t t) {
    const Host& client = pick(clients_);
    const Host& server = pick(servers_);
    static constexpr std::array<std::uint16_t, 8> kPorts = {443, 443, 443, 443, 80, 22, 993, 8080};
    const std::uint16_t cport = ephemeral_port();
    const std::uint16_t sport = kPorts[rng_.below(kPorts.size())];
    const std::uint8_t tc = draw_traffic_class(rng_, true);
    const std::uint32_t clabel = tcp_label();
    const std::uint32_t slabel = tcp_label();
    const auto cwin = static_cast<std::uint16_t>(rng_.range(1024, 65535));
    const auto swin = static_cast<std::uint16_t>(rng_.range(1024, 65535));
    const std::uint64_t rtt = static_cast<std::uint64_t>(rng_.range(2000, 80000));
    std::uint32_t cseq = static_cast<std::uint32_t>(rng_.next());
    std::uint32_t sseq = static_cast<std::uint32_t>(rng_.next());
    using namespace tcp_flags;

    auto c2s = [&](std::uint8_t flags, std::size_t len) {
      emit(t, client, server, kProtoTcp, tc, clabel, tcp_payload(cport, sport, cseq, (flags & ack) ? sseq : 0, flags, cwin, len));
      cseq += static_cast<std::uint32_t>(len) + ((flags & (syn | fin)) ? 1 : 0);
    };
    auto s2c = [&](std::uint8_t flags, std::size_t len) {
      emit(t, server, client, kProtoTcp, tc, slabel, tcp_payload(sport, cport, sseq, cseq, flags, swin, len));
      sseq += static_cast<std::uint32_t>(len) + ((flags & (syn | fin)) ? 1 : 0);
    };

    c2s(syn, 0);
    t += rtt / 2;
    s2c(syn | ack, 0);
    t += rtt / 2;
    c2s(ack, 0);
    const auto rounds = rng_.range(1, 6);
    for (std::int64_t r = 0; r < rounds; ++r) {
      t += static_cast<std::uint64_t>(rng_.range(50, 2000));
      c2s(psh | ack, static_cast<std::size_t>(rng_.range(40, 600)));
      t += rtt / 2;
      const auto segments = rng_.range(1, 10);
      for (std::int64_t s = 0; s < segments; ++s) {
        const bool last = s + 1 == segments;
        const auto len = static_cast<std::size_t>(last ? rng_.range(1, 1440) : 1440);
        s2c(last ? (psh | ack) : ack, len);
        t += static_cast<std::uint64_t>(rng_.range(50, 800));
        if (s % 2 == 1 || last) {
          c2s(ack, 0);
          t += static_cast<std::uint64_t>(rng_.range(20, 300));
        }
      }
      t += static_cast<std::uint64_t>(rng_.range(1000, 200000));
    }
    if (rng_.chance(0.75)) {
      c2s(fin | ack, 0);
      t += rtt / 2;
      s2c(ack, 0);
      t += static_cast<std::uint64_t>(rng_.range(10, 500));
      s2c(fin | ack, 0);
      t += rtt / 2;
      c2s(ack, 0);
    }
  }

  void udp_session(std::uint64_t t) {
    const Host& client = pick(clients_);
    const Host& server = pick(servers_);
    const std::uint8_t tc = draw_traffic_class(rng_, false);
    const std::uint32_t clabel = random_label(rng_);
    const std::uint32_t slabel = random_label(rng_);
    const std::uint16_t cport = ephemeral_port();
    const std::uint64_t rtt = static_cast<std::uint64_t>(rng_.range(2000, 80000));
    const double kind = rng_.unit();
    auto c2s = [&](std::uint16_t sport, std::size_t len) {
      emit(t, client, server, kProtoUdp, tc, clabel, udp_payload(cport, sport, len));
    };
    auto s2c = [&](std::uint16_t sport, std::size_t len) {
      emit(t, server, client, kProtoUdp, tc, slabel, udp_payload(sport, cport, len));
    };
    if (kind < 0.40) {  // DNS lookups
      const auto queries = rng_.range(1, 2);
      for (std::int64_t q = 0; q < queries; ++q) {
        c2s(53, static_cast<std::size_t>(rng_.range(20, 60)));
        t += rtt;
        s2c(53, static_cast<std::size_t>(rng_.range(50, 300)));
        t += static_cast<std::uint64_t>(rng_.range(100, 3000));
      }
    } else if (kind < 0.75) {  // QUIC-style exchange
      const auto exchanges = rng_.range(3, 20);
      for (std::int64_t e = 0; e < exchanges; ++e) {
        c2s(443, static_cast<std::size_t>(e == 0 ? rng_.range(1200, 1350) : rng_.range(30, 100)));
        t += rtt / 2;
        const auto burst = rng_.range(1, 4);
        for (std::int64_t b = 0; b < burst; ++b) {
          s2c(443, static_cast<std::size_t>(rng_.range(1200, 1350)));
          t += static_cast<std::uint64_t>(rng_.range(50, 600));
        }
        t += static_cast<std::uint64_t>(rng_.range(500, 30000));
      }
    } else if (kind < 0.85) {  // NTP
      c2s(123, 48);
      t += rtt;
      s2c(123, 48);
    } else {  // RTP-like media, one direction
      const auto frames = rng_.range(20, 80);
      const std::uint16_t media_port = static_cast<std::uint16_t>(rng_.range(5004, 5100) & ~1);
      const std::size_t frame = rng_.chance(0.5) ? 160 : 172;
      for (std::int64_t f = 0; f < frames; ++f) {
        s2c(media_port, frame);
        t += 20000 + static_cast<std::uint64_t>(rng_.range(0, 400));
      }
    }
  }

  void echo_session(std::uint64_t t) {
    const Host& client = pick(clients_);
    const Host& target = rng_.chance(0.7) ? pick(servers_) : pick(routers_);
    const std::uint8_t tc = draw_traffic_class(rng_, false);
    const std::uint32_t clabel = rng_.chance(0.5) ? 0 : random_label(rng_);
    const std::uint32_t tlabel = rng_.chance(0.5) ? 0 : random_label(rng_);
    const auto id = static_cast<std::uint16_t>(rng_.next());
    Bytes pattern(56);
    fill_random(rng_, pattern, 0);
    const std::uint64_t rtt = static_cast<std::uint64_t>(rng_.range(2000, 80000));
    const std::uint64_t interval = static_cast<std::uint64_t>(rng_.range(10000, 200000));
    const auto count = rng_.range(3, 10);
    for (std::int64_t s = 1; s <= count; ++s) {
      auto message = [&](std::uint8_t type) {
        Bytes p(8, 0);
        p[0] = type;
        put_be16(p, 4, id);
        put_be16(p, 6, static_cast<std::uint16_t>(s));
        p.insert(p.end(), pattern.begin(), pattern.end());
        return p;
      };
      emit(t, client, target, kProtoIcmpv6, tc, clabel, message(128));
      emit(t + rtt, target, client, kProtoIcmpv6, tc, tlabel, message(129));
      t += interval;
    }
  }

  void error_burst(std::uint64_t t) {
    const Host& router = pick(routers_);
    const Host& client = pick(clients_);
    const Host& server = pick(servers_);
    const auto count = rng_.range(1, 3);
    for (std::int64_t e = 0; e < count; ++e) {
      const double u = rng_.unit();
      std::uint8_t type = 1, code = 4;
      std::size_t extra = 0;
      if (u < 0.4) {
        type = 3;
        code = 0;
      } else if (u > 0.8) {
        type = 2;
        code = 0;
        extra = static_cast<std::size_t>(rng_.range(0, 400));
      }
      // ICMPv6 header + the invoking packet's IPv6 header + 8 bytes.
      Bytes p(8 + 40 + 8 + extra, 0);
      p[0] = type;
      p[1] = code;
      if (type == 2) put_be32(p, 4, 1280);
      const std::uint32_t first_word = (6u << 28) | (std::uint32_t{0} << 20) | random_label(rng_);
      put_be32(p, 8, first_word);
      put_be16(p, 12, static_cast<std::uint16_t>(8 + extra + rng_.range(0, 200)));
      p[14] = kProtoUdp;
      p[15] = type == 3 ? 1 : client.hop_limit;
      std::copy(client.address.begin(), client.address.end(), p.begin() + 16);
      std::copy(server.address.begin(), server.address.end(), p.begin() + 32);
      put_be16(p, 48, ephemeral_port());
      put_be16(p, 50, static_cast<std::uint16_t>(rng_.range(1024, 65535)));
      put_be16(p, 52, static_cast<std::uint16_t>(8 + extra));
      fill_random(rng_, p, 54);
      emit(t, router, client, kProtoIcmpv6, 0, random_label(rng_), std::move(p));
      t += static_cast<std::uint64_t>(rng_.range(1000, 500000));
    }
  }

  std::size_t target_;
  Rng rng_;
  std::uint64_t window_us_;
  std::vector<Host> servers_;
  std::vector<Host> clients_;
  std::vector<Host> routers_;
  std::vector<Stamped> emitted_;
  std::size_t session_ = 0;
  std::size_t order_ = 0;
};

// ---- insertion machinery ---------------------------------------------------

struct PlannedInsert {
  std::size_t anchor;  // original index the new packet follows
  std::size_t limit;   // original index it must precede (the next packet of its flow)
  Ipv6Packet packet;
  ChannelKind label;
  std::size_t carrier_rank;  // order within the message
};

struct AppliedInserts {
  LabeledCapture capture;
  std::vector<std::size_t> positions;  // final position of each insert, by input order
};

AppliedInserts apply_inserts(const LabeledCapture& capture, const std::vector<PlannedInsert>& inserts) {
  const std::size_t n = capture.size();
  // Resolve each insert to the last original index it follows, walking
  // forward from its anchor while the capture stays time-ordered.
  std::vector<std::size_t> after(inserts.size());
  for (std::size_t k = 0; k < inserts.size(); ++k) {
    std::size_t pos = inserts[k].anchor;
    const std::size_t limit = std::min(inserts[k].limit, n);
    while (pos + 1 < limit && capture.packets[pos + 1].timestamp <= inserts[k].packet.timestamp) ++pos;
    after[k] = pos;
  }
  std::vector<std::size_t> order(inserts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(after[a], inserts[a].packet.timestamp) < std::tie(after[b], inserts[b].packet.timestamp);
  });

  AppliedInserts result;
  result.positions.resize(inserts.size());
  LabeledCapture& out = result.capture;
  out.packets.reserve(n + inserts.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(capture.packets[i], capture.labels[i], capture.provenance[i], capture.original_hop_limit[i]);
    while (next < order.size() && after[order[next]] == i) {
      const PlannedInsert& ins = inserts[order[next]];
      result.positions[order[next]] = out.size();
      out.push_back(ins.packet, ins.label, Provenance::inserted);
      ++next;
    }
  }
  return result;
}

// Timestamps for `count` packets placed between two flow neighbors.
std::uint64_t interpolate(std::uint64_t from, std::optional<std::uint64_t> to, std::size_t slot,
                          std::size_t count) {
  if (!to || *to <= from) return from + 1000 * (slot + 1);
  return from + (*to - from) * (slot + 1) / (count + 1);
}

std::vector<std::size_t> background_members(const LabeledCapture& capture, const FlowRecord& flow) {
  std::vector<std::size_t> members;
  for (const auto idx : flow.packet_indices) {
    if (capture.provenance[idx] == Provenance::background) members.push_back(idx);
  }
  return members;
}

// Chooses `count` anchors (with repetition) among `candidates`, in capture
// order, and for each the timestamp and the next flow neighbor.
struct AnchorSlot {
  std::size_t anchor;
  std::size_t limit;
  Timestamp timestamp;
};

std::vector<AnchorSlot> spread_over_flow(const LabeledCapture& capture, const FlowRecord& flow,
                                         const std::vector<std::size_t>& candidates, std::size_t count,
                                         Rng& rng) {
  std::vector<std::size_t> picks(count);
  for (auto& p : picks) p = candidates[rng.below(candidates.size())];
  std::sort(picks.begin(), picks.end());
  std::vector<AnchorSlot> slots;
  slots.reserve(count);
  for (std::size_t k = 0; k < count;) {
    std::size_t group = 1;
    while (k + group < count && picks[k + group] == picks[k]) ++group;
    const std::size_t anchor = picks[k];
    const auto it = std::upper_bound(flow.packet_indices.begin(), flow.packet_indices.end(), anchor);
    const std::size_t limit = it == flow.packet_indices.end() ? capture.size() : *it;
    const std::optional<std::uint64_t> next_ts =
        it == flow.packet_indices.end() ? std::nullopt
                                        : std::optional<std::uint64_t>{capture.packets[*it].timestamp.micros()};
    const std::uint64_t from = capture.packets[anchor].timestamp.micros();
    for (std::size_t g = 0; g < group; ++g) {
      slots.push_back({anchor, limit, Timestamp::from_micros(interpolate(from, next_ts, g, group))});
    }
    k += group;
  }
  return slots;
}

bool flowlabel_flow_eligible(const LabeledCapture& capture, const FlowRecord& flow) {
  for (const auto idx : flow.packet_indices) {
    if (capture.provenance[idx] == Provenance::background && is_flowlabel_carrier(capture.packets[idx])) return true;
  }
  return false;
}

bool length_flow_eligible(const LabeledCapture& capture, const FlowRecord& flow) {
  if (flow.key.next_header != kProtoTcp || !flow.last_tcp_seq) return false;
  for (const auto idx : flow.packet_indices) {
    if (capture.provenance[idx] != Provenance::background) continue;
    const auto tcp = parse_tcp(capture.packets[idx]);
    if (tcp && !(tcp->flags & tcp_flags::syn) && (tcp->flags & tcp_flags::ack)) return true;
  }
  return false;
}

std::vector<PlannedInsert> plan_flowlabel(const LabeledCapture& capture, const FlowRecord& flow,
                                          ByteView message, const SharedSecret& secret, Rng& rng) {
  std::vector<std::size_t> candidates;
  for (const auto idx : background_members(capture, flow)) {
    if (is_flowlabel_carrier(capture.packets[idx])) candidates.push_back(idx);
  }
  const std::size_t count = carriers_needed(ChannelKind::flow_label, message.size());
  std::vector<Ipv6Packet> carriers;
  std::vector<AnchorSlot> slots = spread_over_flow(capture, flow, candidates, count, rng);
  for (const AnchorSlot& slot : slots) {
    Ipv6Packet packet = capture.packets[slot.anchor];
    packet.timestamp = slot.timestamp;
    packet.original_length = 0;
    if (packet.next_header == kProtoUdp && packet.payload.size() >= 8) {
      fill_random(rng, packet.payload, 8);
      refresh_l4_checksum(packet);
    }
    carriers.push_back(std::move(packet));
  }
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), 0);
  carriers = embed_flowlabel(std::move(carriers), indices, message, secret);
  std::vector<PlannedInsert> plan;
  for (std::size_t k = 0; k < count; ++k) {
    plan.push_back({slots[k].anchor, slots[k].limit, std::move(carriers[k]), ChannelKind::flow_label, k});
  }
  return plan;
}

std::vector<PlannedInsert> plan_length(const LabeledCapture& capture, const FlowRecord& flow,
                                       ByteView message, const SharedSecret& secret, Rng& rng) {
  // Running sequence number after each packet of the flow.
  std::map<std::size_t, std::uint32_t> running;
  std::optional<std::uint32_t> next_seq;
  std::vector<std::size_t> candidates;
  for (const auto idx : flow.packet_indices) {
    const auto tcp = parse_tcp(capture.packets[idx]);
    if (!tcp) continue;
    const std::uint32_t end = tcp->seq + tcp->sequence_length;
    if (!next_seq || seq_after(end, *next_seq)) next_seq = end;
    running[idx] = *next_seq;
    if (capture.provenance[idx] == Provenance::background && !(tcp->flags & tcp_flags::syn) &&
        (tcp->flags & tcp_flags::ack)) {
      candidates.push_back(idx);
    }
  }
  const std::size_t count = carriers_needed(ChannelKind::length, message.size());
  std::vector<AnchorSlot> slots = spread_over_flow(capture, flow, candidates, count, rng);
  std::vector<Ipv6Packet> carriers;
  for (const AnchorSlot& slot : slots) {
    const Ipv6Packet& anchor = capture.packets[slot.anchor];
    const auto tcp = parse_tcp(anchor);
    Ipv6Packet packet = anchor;
    packet.timestamp = slot.timestamp;
    packet.original_length = 0;
    packet.payload.assign(20, 0);
    put_be16(packet.payload, 0, tcp->src_port);
    put_be16(packet.payload, 2, tcp->dst_port);
    put_be32(packet.payload, 4, running.at(slot.anchor));
    put_be32(packet.payload, 8, tcp->ack);
    packet.payload[12] = 5 << 4;
    packet.payload[13] = tcp_flags::ack;
    put_be16(packet.payload, 14, get_be16(anchor.payload, 14));
    refresh_l4_checksum(packet);
    carriers.push_back(std::move(packet));
  }
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), 0);
  carriers = embed_length(std::move(carriers), indices, message, secret);
  std::vector<PlannedInsert> plan;
  for (std::size_t k = 0; k < count; ++k) {
    plan.push_back({slots[k].anchor, slots[k].limit, std::move(carriers[k]), ChannelKind::length, k});
  }
  return plan;
}

std::vector<PlannedInsert> plan_address(const LabeledCapture& capture, ByteView message,
                                        const SharedSecret& secret, Rng& rng) {
  const std::size_t n = capture.size();
  const Ipv6Packet& sender = capture.packets[rng.below(n)];
  const auto sport = static_cast<std::uint16_t>(rng.range(49152, 65535));
  const auto dport = static_cast<std::uint16_t>(rng.range(1024, 65535));
  const std::uint32_t label = random_label(rng);
  const std::size_t count = carriers_needed(ChannelKind::address, message.size());

  std::vector<std::size_t> anchors(count);
  for (auto& a : anchors) a = rng.below(n);
  std::sort(anchors.begin(), anchors.end());
  std::vector<Ipv6Packet> carriers;
  std::vector<std::size_t> limits;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t anchor = anchors[k];
    std::size_t same = 0, group = 0;
    for (std::size_t j = 0; j < count; ++j) {
      if (anchors[j] == anchor) {
        if (j < k) ++same;
        ++group;
      }
    }
    const std::uint64_t from = capture.packets[anchor].timestamp.micros();
    const std::optional<std::uint64_t> to =
        anchor + 1 < n ? std::optional<std::uint64_t>{capture.packets[anchor + 1].timestamp.micros()} : std::nullopt;
    Ipv6Packet packet;
    packet.traffic_class = sender.traffic_class;
    packet.flow_label = label;
    packet.next_header = kProtoUdp;
    packet.hop_limit = sender.hop_limit;
    packet.src = sender.src;
    packet.dst = sender.dst;
    packet.link_type = sender.link_type;
    packet.link_header = sender.link_header;
    packet.payload.assign(8 + static_cast<std::size_t>(rng.range(16, 120)), 0);
    put_be16(packet.payload, 0, sport);
    put_be16(packet.payload, 2, dport);
    put_be16(packet.payload, 4, static_cast<std::uint16_t>(packet.payload.size()));
    fill_random(rng, packet.payload, 8);
    packet.payload_length_declared = static_cast<std::uint16_t>(packet.payload.size());
    packet.timestamp = Timestamp::from_micros(interpolate(from, to, same, group));
    carriers.push_back(std::move(packet));
    limits.push_back(anchor + 1);
  }
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), 0);
  carriers = embed_address(std::move(carriers), indices, message, secret);
  std::vector<PlannedInsert> plan;
  for (std::size_t k = 0; k < count; ++k) {
    refresh_l4_checksum(carriers[k]);
    plan.push_back({anchors[k], limits[k], std::move(carriers[k]), ChannelKind::address, k});
  }
  return plan;
}

// Consecutive background packets of `flow` starting at a random offset.
std::vector<std::size_t> pick_modulation_run(const std::vector<std::size_t>& members, std::size_t count,
                                             Rng& rng) {
  const std::size_t start = rng.below(members.size() - count + 1);
  return {members.begin() + static_cast<std::ptrdiff_t>(start),
          members.begin() + static_cast<std::ptrdiff_t>(start + count)};
}

void modulate(LabeledCapture& capture, const std::vector<std::size_t>& carriers,
              std::span<const std::uint8_t> symbols, HopLimitAlphabet alphabet) {
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const std::size_t idx = carriers[k];
    capture.original_hop_limit[idx] = capture.packets[idx].hop_limit;
    capture.packets[idx].hop_limit = alphabet.value_of(symbols[k]);
    capture.labels[idx] = ChannelKind::hop_limit;
    capture.provenance[idx] = Provenance::modulated;
  }
}

Bytes random_message(Rng& rng, std::size_t length) {
  Bytes message(length);
  for (auto& b : message) b = static_cast<std::uint8_t>(rng.range(0x20, 0x7E));
  return message;
}

[[noreturn]] void infeasible(ChannelKind channel, const std::string& why) {
  throw Error(Errc::injection_infeasible, std::string(channel_name(channel)) + ": " + why);
}

template <typename Pred>
std::vector<std::size_t> eligible_flows(const FlowTable& table, Pred pred) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < table.size(); ++f) {
    if (pred(table.flows()[f])) out.push_back(f);
  }
  return out;
}

}  // namespace

LabeledCapture generate_background(std::size_t packet_count, std::uint64_t seed) {
  if (packet_count == 0) return {};
  return LabeledCapture::from_background(BackgroundGenerator(packet_count, seed).run());
}

// ---- inject ----------------------------------------------------------------

Injection inject(const LabeledCapture& capture, ChannelKind channel, ByteView message,
                 const SharedSecret& secret, const InjectOptions& options) {
  capture.validate();
  if (message.empty()) throw Error(Errc::invalid_argument, "covert message must not be empty");
  Rng rng(mix_seed(options.seed, 0x17));
  const FlowTable table = build_flow_table(capture.packets);

  auto choose = [&](const std::vector<std::size_t>& flows) -> const FlowRecord& {
    return table.flows()[flows[rng.below(flows.size())]];
  };

  std::vector<PlannedInsert> plan;
  switch (channel) {
    case ChannelKind::flow_label: {
      const auto flows = eligible_flows(table, [&](const FlowRecord& f) { return flowlabel_flow_eligible(capture, f); });
      if (flows.empty()) infeasible(channel, "no UDP or ICMPv6-error flow to join");
      plan = plan_flowlabel(capture, choose(flows), message, secret, rng);
      break;
    }
    case ChannelKind::length: {
      const auto flows = eligible_flows(table, [&](const FlowRecord& f) { return length_flow_eligible(capture, f); });
      if (flows.empty()) infeasible(channel, "no established TCP flow to join");
      plan = plan_length(capture, choose(flows), message, secret, rng);
      break;
    }
    case ChannelKind::address: {
      if (capture.size() == 0) infeasible(channel, "empty capture");
      plan = plan_address(capture, message, secret, rng);
      break;
    }
    case ChannelKind::hop_limit: {
      const HopLimitAlphabet alphabet{options.hop_limit_mode};
      const auto symbols = message_to_symbols(message, alphabet.mode);
      const auto flows = eligible_flows(table, [&](const FlowRecord& f) {
        return background_members(capture, f).size() >= symbols.size();
      });
      Injection result{capture, {}};
      if (!flows.empty()) {
        const auto members = background_members(capture, choose(flows));
        result.carriers = pick_modulation_run(members, symbols.size(), rng);
      } else {
        // No single flow is long enough: take whole flows until the symbols
        // fit, and modulate their packets in capture order.
        std::vector<std::size_t> order(table.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        for (const std::size_t f : order) {
          if (result.carriers.size() >= symbols.size()) break;
          const auto members = background_members(capture, table.flows()[f]);
          result.carriers.insert(result.carriers.end(), members.begin(), members.end());
        }
        if (result.carriers.size() < symbols.size()) {
          infeasible(channel, "capture has fewer than " + std::to_string(symbols.size()) + " unmodulated packets");
        }
        std::sort(result.carriers.begin(), result.carriers.end());
        result.carriers.resize(symbols.size());
      }
      modulate(result.capture, result.carriers, symbols, alphabet);
      return result;
    }
    case ChannelKind::normal:
      throw Error(Errc::invalid_argument, "normal is not an embedding channel");
  }
  AppliedInserts applied = apply_inserts(capture, plan);
  return {std::move(applied.capture), std::move(applied.positions)};
}

// ---- build_mixed_dataset ---------------------------------------------------

LabeledCapture build_mixed_dataset(const MixConfig& config, const SharedSecret& secret) {
  const std::size_t hop_count = config.count(ChannelKind::hop_limit);
  LabeledCapture capture = generate_background(config.normal_count + hop_count, config.seed);
  Rng rng(mix_seed(config.seed, 0xD5));

  auto draw_length = [&](std::size_t max_bytes) {
    const auto lo = static_cast<std::int64_t>(config.min_message_bytes);
    const auto hi = static_cast<std::int64_t>(config.max_message_bytes);
    return std::min(static_cast<std::size_t>(rng.range(lo, hi)), max_bytes);
  };

  for (const ChannelKind channel : {ChannelKind::flow_label, ChannelKind::length, ChannelKind::address}) {
    std::size_t remaining = config.count(channel);
    if (remaining == 0) continue;
    const FlowTable table = build_flow_table(capture.packets);
    std::vector<std::size_t> flows;
    if (channel == ChannelKind::flow_label) {
      flows = eligible_flows(table, [&](const FlowRecord& f) { return flowlabel_flow_eligible(capture, f); });
    } else if (channel == ChannelKind::length) {
      flows = eligible_flows(table, [&](const FlowRecord& f) { return length_flow_eligible(capture, f); });
    }
    if (channel != ChannelKind::address && flows.empty()) infeasible(channel, "no eligible flow in background");
    if (capture.size() == 0) infeasible(channel, "empty background");
    rng.shuffle(std::span<std::size_t>(flows));

    std::vector<PlannedInsert> plan;
    std::size_t next_flow = 0;
    while (remaining > 0) {
      const std::size_t per_carrier = channel == ChannelKind::address ? 8 : 2;
      const Bytes message = random_message(rng, draw_length(per_carrier * remaining));
      std::vector<PlannedInsert> part;
      if (channel == ChannelKind::address) {
        part = plan_address(capture, message, secret, rng);
      } else {
        const FlowRecord& flow = table.flows()[flows[next_flow++ % flows.size()]];
        part = channel == ChannelKind::flow_label ? plan_flowlabel(capture, flow, message, secret, rng)
                                                  : plan_length(capture, flow, message, secret, rng);
      }
      remaining -= part.size();
      std::move(part.begin(), part.end(), std::back_inserter(plan));
    }
    capture = apply_inserts(capture, plan).capture;
  }

  if (hop_count > 0) {
    const FlowTable table = build_flow_table(capture.packets);
    std::vector<std::size_t> flows = eligible_flows(table, [&](const FlowRecord& f) {
      return background_members(capture, f).size() >= 3;
    });
    rng.shuffle(std::span<std::size_t>(flows));
    const HopLimitAlphabet alphabet{HopLimitMode::binary};
    std::size_t remaining = hop_count;
    for (const std::size_t f : flows) {
      if (remaining == 0) break;
      const auto members = background_members(capture, table.flows()[f]);
      // Never modulate more than half a flow so its hop-limit mode survives.
      const std::size_t room = (members.size() - 1) / 2;
      const Bytes message = random_message(rng, draw_length(SIZE_MAX));
      auto symbols = message_to_symbols(message, alphabet.mode);
      symbols.resize(std::min({symbols.size(), room, remaining}));
      const auto carriers = pick_modulation_run(members, symbols.size(), rng);
      modulate(capture, carriers, symbols, alphabet);
      remaining -= symbols.size();
    }
    if (remaining > 0) {
      infeasible(ChannelKind::hop_limit, std::to_string(remaining) + " packets could not be modulated");
    }
  }

  capture.validate();
  const auto histogram = capture.label_histogram();
  for (std::size_t k = 0; k < kChannelKindCount; ++k) {
    if (histogram[k] != config.count(static_cast<ChannelKind>(k))) {
      throw Error(Errc::injection_infeasible, "label histogram does not match the requested mix");
    }
  }
  return capture;
}

// ---- split / label files ---------------------------------------------------

std::size_t train_size(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::invalid_argument, "train fraction must lie strictly between 0 and 1");
  }
  return static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
}

std::pair<LabeledCapture, LabeledCapture> split_sequential(const LabeledCapture& capture,
                                                           double train_fraction) {
  const std::size_t cut = train_size(capture.size(), train_fraction);
  LabeledCapture train, test;
  for (std::size_t i = 0; i < capture.size(); ++i) {
    LabeledCapture& part = i < cut ? train : test;
    part.push_back(capture.packets[i], capture.labels[i], capture.provenance[i], capture.original_hop_limit[i]);
  }
  return {std::move(train), std::move(test)};
}

void write_label_csv(const LabeledCapture& capture, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << "packet_index,label,provenance\n";
  for (std::size_t i = 0; i < capture.size(); ++i) {
    out << i << ',' << channel_name(capture.labels[i]) << ',' << provenance_name(capture.provenance[i]) << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

LabeledCapture read_label_csv(std::vector<Ipv6Packet> packets, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  LabeledCapture capture = LabeledCapture::from_background(std::move(packets));
  std::string line;
  std::size_t line_number = 1;
  if (!std::getline(in, line) || line != "packet_index,label,provenance") {
    throw Error(Errc::csv_parse, path.string() + ":1: expected header packet_index,label,provenance");
  }
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw Error(Errc::csv_parse, path.string() + ":" + std::to_string(line_number) + ": " + why);
    };
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) fail("expected 3 columns");
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + c1, index);
    if (ec != std::errc{} || ptr != line.data() + c1) fail("bad packet_index");
    if (index != rows) fail("packet_index out of sequence");
    if (index >= capture.size()) fail("more label rows than packets");
    const auto label = parse_channel(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
    const auto origin = parse_provenance(std::string_view(line).substr(c2 + 1));
    if (!label) fail("unknown label");
    if (!origin) fail("unknown provenance");
    capture.labels[index] = *label;
    capture.provenance[index] = *origin;
    ++rows;
  }
  if (rows != capture.size()) {
    throw Error(Errc::csv_parse, path.string() + ": " + std::to_string(rows) + " label rows for " +
                                     std::to_string(capture.size()) + " packets");
  }
  capture.validate();
  return capture;
}

}  // namespace v6covert
