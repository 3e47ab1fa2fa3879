#pragma once

// Shared fixtures for the unit tests and the acceptance run. Oracles here
// are written independently of the library code on purpose.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "v6covert/pcap_io.hpp"

namespace testsupport {

using v6covert::Bytes;
using v6covert::Ipv6Address;
using v6covert::Ipv6Packet;

inline Ipv6Address addr(std::uint8_t net, std::uint8_t host) {
  Ipv6Address a{0x20, 0x01, 0x0d, 0xb8, 0, net, 0, 0, 0, 0, 0, 0, 0, 0, 0, host};
  return a;
}

inline void be16(Bytes& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v >> 8);
  b[at + 1] = static_cast<std::uint8_t>(v);
}

inline void be32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b[at + k] = static_cast<std::uint8_t>(v >> (24 - 8 * k));
}

inline Ipv6Packet base_packet(std::uint8_t proto, Ipv6Address src, Ipv6Address dst, Bytes payload) {
  Ipv6Packet p;
  p.next_header = proto;
  p.hop_limit = 64;
  p.src = src;
  p.dst = dst;
  p.payload = std::move(payload);
  p.payload_length_declared = static_cast<std::uint16_t>(p.payload.size());
  return p;
}

inline Ipv6Packet tcp_packet(Ipv6Address src, Ipv6Address dst, std::uint16_t sport, std::uint16_t dport,
                             std::uint32_t seq, std::size_t data_len, std::uint8_t flags = 0x10,
                             std::uint32_t ack = 1) {
  Bytes b(20 + data_len, 0xAB);
  be16(b, 0, sport);
  be16(b, 2, dport);
  be32(b, 4, seq);
  be32(b, 8, ack);
  b[12] = 5 << 4;
  b[13] = flags;
  be16(b, 14, 64000);
  be16(b, 16, 0);
  be16(b, 18, 0);
  auto p = base_packet(6, src, dst, std::move(b));
  v6covert::refresh_l4_checksum(p);
  return p;
}

inline Ipv6Packet udp_packet(Ipv6Address src, Ipv6Address dst, std::uint16_t sport, std::uint16_t dport,
                             std::size_t data_len = 24, std::uint32_t flow_label = 0) {
  Bytes b(8 + data_len, 0x5A);
  be16(b, 0, sport);
  be16(b, 2, dport);
  be16(b, 4, static_cast<std::uint16_t>(b.size()));
  be16(b, 6, 0);
  auto p = base_packet(17, src, dst, std::move(b));
  p.flow_label = flow_label;
  v6covert::refresh_l4_checksum(p);
  return p;
}

inline Ipv6Packet icmp_packet(Ipv6Address src, Ipv6Address dst, std::uint8_t type, std::size_t body = 48) {
  Bytes b(4 + body, 0);
  b[0] = type;
  auto p = base_packet(58, src, dst, std::move(b));
  v6covert::refresh_l4_checksum(p);
  return p;
}

// Textbook RC4, kept deliberately naive.
inline Bytes rc4_oracle(const Bytes& key, const Bytes& data) {
  std::array<int, 256> s;
  for (int i = 0; i < 256; ++i) s[i] = i;
  int j = 0;
  for (int i = 0; i < 256; ++i) {
    j = (j + s[i] + key[i % key.size()]) % 256;
    std::swap(s[i], s[j]);
  }
  Bytes out;
  int i = 0;
  j = 0;
  for (const auto byte : data) {
    i = (i + 1) % 256;
    j = (j + s[i]) % 256;
    std::swap(s[i], s[j]);
    out.push_back(static_cast<std::uint8_t>(byte ^ s[(s[i] + s[j]) % 256]));
  }
  return out;
}

inline Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

inline std::string hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (auto x : b) {
    out += digits[x >> 4];
    out += digits[x & 15];
  }
  return out;
}

// Per-class counts and metrics from raw pairs, one class at a time.
struct OracleClass {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0, recall = 0, f1 = 0;
  bool present = false;
};

struct OracleResult {
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<OracleClass> classes;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0, accuracy = 0;
};

inline OracleResult metrics_oracle(const std::vector<int>& pred, const std::vector<int>& actual, int k) {
  OracleResult r;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.confusion[actual[i]][pred[i]] += 1;
    if (pred[i] == actual[i]) ++correct;
  }
  r.accuracy = pred.empty() ? 0.0 : double(correct) / double(pred.size());
  int present = 0;
  for (int c = 0; c < k; ++c) {
    OracleClass oc;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == c, a = actual[i] == c;
      if (p && a) ++oc.tp;
      else if (p) ++oc.fp;
      else if (a) ++oc.fn;
      else ++oc.tn;
    }
    oc.present = oc.tp + oc.fp + oc.fn > 0;
    oc.precision = oc.tp + oc.fp ? double(oc.tp) / double(oc.tp + oc.fp) : 0.0;
    oc.recall = oc.tp + oc.fn ? double(oc.tp) / double(oc.tp + oc.fn) : 0.0;
    oc.f1 = oc.precision + oc.recall > 0 ? 2 * oc.precision * oc.recall / (oc.precision + oc.recall) : 0.0;
    if (oc.present) {
      ++present;
      r.macro_precision += oc.precision;
      r.macro_recall += oc.recall;
      r.macro_f1 += oc.f1;
    }
    r.classes.push_back(oc);
  }
  if (present) {
    r.macro_precision /= present;
    r.macro_recall /= present;
    r.macro_f1 /= present;
  }
  return r;
}

}  // namespace testsupport
