// End-to-end acceptance run. One PASS/FAIL line per criterion; exit status
// is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>

#include "support.hpp"
#include "v6covert/channels.hpp"
#include "v6covert/crypto.hpp"
#include "v6covert/dataset.hpp"
#include "v6covert/features.hpp"
#include "v6covert/ml/metrics.hpp"
#include "v6covert/ml/model.hpp"
#include "v6covert/profile.hpp"
#include "v6covert/rng.hpp"

using namespace v6covert;
using namespace v6covert::ml;
using testsupport::bytes_of;
using testsupport::rc4_oracle;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 -------------------------------------------------------------------

SharedSecret random_secret(Rng& rng) {
  Bytes key(1 + rng.below(32));
  for (auto& b : key) b = rng.byte();
  NibbleSequence seq;
  std::iota(seq.begin(), seq.end(), 0);
  rng.shuffle(std::span<std::uint8_t>(seq));
  return SharedSecret::make(key, seq, static_cast<std::uint8_t>(rng.below(256)));
}

std::vector<Ipv6Packet> carriers(std::size_t n, Rng& rng) {
  std::vector<Ipv6Packet> out;
  for (std::size_t k = 0; k < n; ++k) {
    auto p = rng.chance(0.5) ? testsupport::udp_packet(testsupport::addr(1, 1), testsupport::addr(2, 2), 5000, 53,
                                                        rng.below(64))
                             : testsupport::icmp_packet(testsupport::addr(1, 1), testsupport::addr(2, 2),
                                                         static_cast<std::uint8_t>(1 + rng.below(4)));
    p.hop_limit = static_cast<std::uint8_t>(rng.below(256));
    out.push_back(std::move(p));
  }
  return out;
}

bool trial(ChannelKind channel, Rng& rng) {
  Bytes msg(1 + rng.below(64));
  for (auto& b : msg) b = rng.byte();
  const SharedSecret secret = random_secret(rng);
  const HopLimitMode mode = rng.chance(0.5) ? HopLimitMode::binary : HopLimitMode::ternary;
  const std::size_t n = channel == ChannelKind::hop_limit ? symbols_for_bytes(msg.size(), mode)
                                                          : carriers_needed(channel, msg.size());
  auto pkts = carriers(n, rng);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  switch (channel) {
    case ChannelKind::flow_label: {
      auto out = embed_flowlabel(pkts, idx, msg, secret);
      for (std::size_t s = 0; s < n; s += 16) rng.shuffle(std::span(out).subspan(s, std::min<std::size_t>(16, n - s)));
      return extract_flowlabel(out, secret, msg.size()).message == msg;
    }
    case ChannelKind::length:
      return extract_length(embed_length(pkts, idx, msg, secret), secret, msg.size()) == msg;
    case ChannelKind::address:
      return extract_address(embed_address(pkts, idx, msg, secret), secret, msg.size()) == msg;
    case ChannelKind::hop_limit: {
      const HopLimitAlphabet alphabet{mode};
      auto out = embed_hoplimit(pkts, idx, message_to_symbols(msg, mode), alphabet);
      for (auto& p : out) p.hop_limit = static_cast<std::uint8_t>(p.hop_limit - rng.below(32));
      std::vector<std::uint8_t> symbols;
      for (const auto s : extract_hoplimit(out, alphabet)) {
        if (!s) return false;
        symbols.push_back(*s);
      }
      return symbols_to_message(symbols, mode, msg.size()) == msg;
    }
    case ChannelKind::normal:
      break;
  }
  return false;
}

void channel_round_trips() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::string detail;
  bool ok = true;
  for (const ChannelKind channel : kCovertChannels) {
    int good = 0;
    for (int t = 0; t < 1000; ++t) good += trial(channel, rng);
    ok = ok && good == 1000;
    detail += fmt("%s %d/1000, ", std::string(channel_name(channel)).c_str(), good);
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 30.0;
  report(1, "channel round trips", ok, detail + fmt("%.2fs", elapsed));
}

// ---- 2 -------------------------------------------------------------------

void rc4_vectors() {
  Rc4State a(Bytes{1, 2, 3, 4, 5});
  const Bytes ks = a.apply(Bytes(16, 0));
  Rc4State b(bytes_of("Key"));
  const Bytes ct = b.apply(bytes_of("Plaintext"));
  const bool ok = to_hex(ks) == "b2396305f03dc027ccc3524a0a1118a8" && ks == rc4_oracle(Bytes{1, 2, 3, 4, 5}, Bytes(16, 0)) &&
                  to_hex(ct) == "bbf316e8d940af0ad3" && ct == rc4_oracle(bytes_of("Key"), bytes_of("Plaintext"));
  report(2, "RC4 vectors", ok, "keystream " + to_hex(ks) + ", ciphertext " + to_hex(ct));
}

// ---- 3 -------------------------------------------------------------------

void pcap_fidelity() {
  const auto bg = generate_background(10000, 42);
  const Bytes file = encode_pcap(bg.packets, LinkType::raw);
  const auto path = std::filesystem::temp_directory_path() / "v6covert_acceptance.pcap";
  write_pcap(bg.packets, path);
  const auto back = read_pcap(path);
  std::filesystem::remove(path);
  const bool fields = back.packets == bg.packets && back.skipped == 0;
  const bool bytes = encode_pcap(back.packets, LinkType::raw) == file;

  const SharedSecret secret = SharedSecret::make(parse_key_hex("0123456789abcdef"));
  const Bytes msg = bytes_of("unmodified packets must survive untouched");
  bool untouched = true;
  for (const ChannelKind channel : kCovertChannels) {
    const auto inj = inject(bg, channel, msg, secret);
    std::size_t next = 0;
    for (std::size_t i = 0; i < inj.capture.size(); ++i) {
      const auto origin = inj.capture.provenance[i];
      if (origin == Provenance::inserted) continue;
      if (origin == Provenance::background &&
          serialize_ipv6(inj.capture.packets[i]) != serialize_ipv6(bg.packets[next])) {
        untouched = false;
      }
      ++next;
    }
    untouched = untouched && next == bg.size();
  }
  report(3, "pcap fidelity", fields && bytes && untouched,
         fmt("%zu packets, fields %s, bytes %s, injected captures %s", bg.size(), fields ? "equal" : "differ",
             bytes ? "equal" : "differ", untouched ? "clean" : "altered"));
}

// ---- 4 -------------------------------------------------------------------

void metrics_oracle() {
  Rng rng(99);
  int agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + static_cast<int>(rng.below(4));
    const std::size_t n = 1 + rng.below(200);
    std::vector<int> pred(n), actual(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(k));
      actual[i] = static_cast<int>(rng.below(k));
    }
    const auto ev = evaluate(pred, actual, k);
    const auto o = testsupport::metrics_oracle(pred, actual, k);
    bool same = std::abs(ev.metrics.accuracy - o.accuracy) <= 1e-12 &&
                std::abs(ev.metrics.macro_f1 - o.macro_f1) <= 1e-12 &&
                std::abs(ev.metrics.macro_precision - o.macro_precision) <= 1e-12 &&
                std::abs(ev.metrics.macro_recall - o.macro_recall) <= 1e-12;
    for (int a = 0; a < k; ++a) {
      for (int p = 0; p < k; ++p) same = same && ev.confusion.at(a, p) == o.confusion[a][p];
      const auto& c = ev.metrics.per_class[a];
      same = same && std::abs(c.precision - o.classes[a].precision) <= 1e-12 &&
             std::abs(c.recall - o.classes[a].recall) <= 1e-12 && std::abs(c.f1 - o.classes[a].f1) <= 1e-12;
    }
    agree += same;
  }
  report(4, "metrics oracle", agree == 1000, fmt("%d/1000 lists agree", agree));
}

// ---- 5, 6, 7 -------------------------------------------------------------

struct DeskRun {
  std::string rf_binary_json, rf_multi_json, gb_binary_json;
  std::vector<int> rf_binary_pred, rf_multi_pred, gb_binary_pred;
  MetricsReport rf_binary, rf_multi, gb_binary;
  std::vector<ChannelKind> pipeline;
  std::vector<int> stage1_on_test;
  double seconds = 0;
};

DeskRun desk_scale() {
  const auto t0 = Clock::now();
  const SharedSecret secret = SharedSecret::make(parse_key_hex("0123456789abcdef"));
  const LabeledCapture cap = build_mixed_dataset(desk_scale_mix(42), secret);
  const auto rows = extract_features(cap.packets);
  const std::size_t cut = train_size(rows.size(), 0.75);
  const Matrix xtr = to_matrix(std::span(rows).first(cut));
  const Matrix xte = to_matrix(std::span(rows).subspan(cut));
  const std::span<const ChannelKind> ltr(cap.labels.data(), cut);
  const std::span<const ChannelKind> lte(cap.labels.data() + cut, cap.labels.size() - cut);

  DeskRun run;
  ForestParams fp;
  fp.seed = 42;
  BoostingParams bp;
  bp.seed = 42;

  const auto ybtr = class_indices(ltr, Task::binary), ybte = class_indices(lte, Task::binary);
  const auto ymtr = class_indices(ltr, Task::multiclass), ymte = class_indices(lte, Task::multiclass);

  const EnsembleModel rfb(train_random_forest(xtr, ybtr, 2, fp));
  const EnsembleModel rfm(train_random_forest(xtr, ymtr, kChannelKindCount, fp));
  const EnsembleModel gbb(train_gradient_boosting(xtr, ybtr, 2, bp));

  run.rf_binary_json = rfb.to_json();
  run.rf_multi_json = rfm.to_json();
  run.gb_binary_json = gbb.to_json();
  run.rf_binary_pred = rfb.predict(xte);
  run.rf_multi_pred = rfm.predict(xte);
  run.gb_binary_pred = gbb.predict(xte);
  run.rf_binary = evaluate(run.rf_binary_pred, ybte, 2).metrics;
  run.rf_multi = evaluate(run.rf_multi_pred, ymte, kChannelKindCount).metrics;
  run.gb_binary = evaluate(run.gb_binary_pred, ybte, 2).metrics;
  run.pipeline = run_two_stage_pipeline(rfb, rfm, xte);
  run.stage1_on_test = run.rf_binary_pred;
  run.seconds = seconds_since(t0);
  return run;
}

}  // namespace

int main() {
  channel_round_trips();
  rc4_vectors();
  pcap_fidelity();
  metrics_oracle();

  const DeskRun first = desk_scale();
  {
    const auto& b = first.rf_binary;
    const auto& m = first.rf_multi;
    const auto& g = first.gb_binary;
    const double covert_f1 = b.per_class[1].f1;
    const bool ok = b.accuracy >= 0.90 && covert_f1 >= 0.90 && m.accuracy >= 0.90 && m.macro_f1 >= 0.90 &&
                    g.accuracy >= 0.85 && first.seconds < 300.0;
    report(5, "desk-scale detection", ok,
           fmt("rf binary acc %.4f f1 %.4f; rf multiclass acc %.4f macro-f1 %.4f; gb binary acc %.4f; %.1fs",
               b.accuracy, covert_f1, m.accuracy, m.macro_f1, g.accuracy, first.seconds));
  }
  {
    std::size_t violations = 0, flagged = 0;
    for (std::size_t i = 0; i < first.pipeline.size(); ++i) {
      if (first.stage1_on_test[i] == 0 && first.pipeline[i] != ChannelKind::normal) ++violations;
      flagged += first.stage1_on_test[i] == 1;
    }
    report(6, "pipeline consistency", violations == 0,
           fmt("%zu test packets, %zu flagged by stage 1, %zu violations", first.pipeline.size(), flagged, violations));
  }
  {
    const DeskRun second = desk_scale();
    const bool models = first.rf_binary_json == second.rf_binary_json && first.rf_multi_json == second.rf_multi_json &&
                        first.gb_binary_json == second.gb_binary_json;
    const bool preds = first.rf_binary_pred == second.rf_binary_pred && first.rf_multi_pred == second.rf_multi_pred &&
                       first.gb_binary_pred == second.gb_binary_pred && first.pipeline == second.pipeline;
    const bool metrics = first.rf_binary == second.rf_binary && first.rf_multi == second.rf_multi &&
                         first.gb_binary == second.gb_binary;
    report(7, "determinism", models && preds && metrics,
           fmt("models %s, predictions %s, metrics %s", models ? "identical" : "differ", preds ? "identical" : "differ",
               metrics ? "identical" : "differ"));
  }
  {
    const auto bg = generate_background(10000, 42);
    const auto r = profile_capture(bg.packets);
    const auto& tcp = r.flowlabel_stats[static_cast<std::size_t>(ProtocolClass::tcp)];
    const double mass = r.hop_limit_cluster_mass();
    const bool ok = mass >= 0.95 && tcp.flows > 0 && tcp.fraction_constant_per_flow == 1.0;
    report(8, "profile sanity", ok,
           fmt("cluster mass %.4f, %zu tcp flows, constant share %.4f", mass, tcp.flows, tcp.fraction_constant_per_flow));
  }
  return failures;
}
