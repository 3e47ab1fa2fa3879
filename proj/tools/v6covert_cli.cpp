// v6covert: embed, extract, inject and detect IPv6 covert channels in pcap files.
//
// The RC4 key comes from --key-hex or, preferably, the V6COVERT_KEY
// environment variable. It is never echoed.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "v6covert/channels.hpp"
#include "v6covert/crypto.hpp"
#include "v6covert/dataset.hpp"
#include "v6covert/error.hpp"
#include "v6covert/features.hpp"
#include "v6covert/ml/metrics.hpp"
#include "v6covert/ml/model.hpp"
#include "v6covert/pcap_io.hpp"
#include "v6covert/profile.hpp"

using namespace v6covert;

namespace {

constexpr const char* kKeyEnv = "V6COVERT_KEY";

struct SecretFlags {
  std::string key_hex;
  std::string sequence;
  unsigned shift = kDefaultAsciiShift;

  void attach(CLI::App* cmd) {
    cmd->add_option("--key-hex", key_hex, std::string("RC4 key as hex (default: $") + kKeyEnv + ")");
    cmd->add_option("--sequence", sequence, "16-nibble FlowLabel sequence, e.g. EA712345689BCDF0");
    cmd->add_option("--shift", shift, "ASCII shift for the length channel")->check(CLI::Range(0, 255));
  }

  SharedSecret resolve() const {
    std::string key = key_hex;
    if (key.empty()) {
      if (const char* env = std::getenv(kKeyEnv)) key = env;
    }
    if (key.empty()) {
      throw Error(Errc::invalid_key, std::string("no key: pass --key-hex or set ") + kKeyEnv);
    }
    const NibbleSequence seq = sequence.empty() ? kDefaultSequence : parse_sequence(sequence);
    return SharedSecret::make(parse_key_hex(key), seq, static_cast<std::uint8_t>(shift));
  }
};

HopLimitMode hop_mode(bool ternary) { return ternary ? HopLimitMode::ternary : HopLimitMode::binary; }

ChannelKind covert_channel(const std::string& name) {
  const auto kind = parse_channel(name);
  if (!kind || *kind == ChannelKind::normal) {
    throw Error(Errc::invalid_argument, "unknown channel '" + name + "' (hoplimit, address, length, flowlabel)");
  }
  return *kind;
}

LabeledCapture load_capture(const std::string& pcap, const std::string& labels) {
  PcapContents contents = read_pcap(pcap);
  if (contents.skipped > 0) {
    std::fprintf(stderr, "note: skipped %zu non-IPv6 record(s)\n", contents.skipped);
  }
  if (labels.empty()) return LabeledCapture::from_background(std::move(contents.packets));
  return read_label_csv(std::move(contents.packets), labels);
}

Bytes read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

std::string printable(ByteView bytes) {
  std::string out;
  for (const auto b : bytes) out += (b >= 0x20 && b < 0x7F) ? static_cast<char>(b) : '.';
  return out;
}

void print_evaluation(const ml::Evaluation& ev, ml::Task task) {
  const auto names = ml::class_names(task);
  std::cout << ml::format_confusion(ev.confusion, names) << '\n' << ml::format_metrics(ev.metrics, names);
  if (task == ml::Task::binary) {
    std::printf("covert f1    %.4f\n", ev.metrics.per_class[1].f1);
  }
}

// ---- subcommands -----------------------------------------------------------

struct ProfileCmd {
  std::string in, out;
  void run() const {
    const LabeledCapture capture = load_capture(in, "");
    const ProfileReport report = profile_capture(capture.packets);
    write_profile(report, out);
    std::cout << report.summary();
  }
};

struct GenerateCmd {
  std::string out, labels, config;
  std::optional<std::uint64_t> seed;
  bool desk_scale = false;
  std::size_t normal = 0, hoplimit = 0, address = 0, length = 0, flowlabel = 0;
  SecretFlags secret;

  void run() const {
    MixConfig mix;
    if (desk_scale) {
      mix = desk_scale_mix();
    } else if (!config.empty()) {
      mix = MixConfig::load(config);
    } else {
      mix.normal_count = normal;
      mix.set_count(ChannelKind::hop_limit, hoplimit);
      mix.set_count(ChannelKind::address, address);
      mix.set_count(ChannelKind::length, length);
      mix.set_count(ChannelKind::flow_label, flowlabel);
    }
    if (seed) mix.seed = *seed;
    const bool covert = mix.total() != mix.normal_count;
    const LabeledCapture capture =
        covert ? build_mixed_dataset(mix, secret.resolve()) : generate_background(mix.normal_count, mix.seed);
    write_pcap(capture.packets, out);
    write_label_csv(capture, labels);
    const auto h = capture.label_histogram();
    std::printf("wrote %zu packets to %s\n", capture.size(), out.c_str());
    for (std::size_t k = 0; k < kChannelKindCount; ++k) {
      const auto name = channel_name(static_cast<ChannelKind>(k));
      std::printf("  %-10.*s %zu\n", static_cast<int>(name.size()), name.data(), h[k]);
    }
  }
};

struct InjectCmd {
  std::string in, labels, out, labels_out, channel, message, message_file;
  std::uint64_t seed = 42;
  bool ternary = false;
  SecretFlags secret;

  void run() const {
    const LabeledCapture capture = load_capture(in, labels);
    const Bytes payload = message_file.empty() ? Bytes(message.begin(), message.end()) : read_file_bytes(message_file);
    InjectOptions options;
    options.seed = seed;
    options.hop_limit_mode = hop_mode(ternary);
    const Injection result = inject(capture, covert_channel(channel), payload, secret.resolve(), options);
    const LinkType link = capture.packets.empty() ? LinkType::raw : capture.packets.front().link_type;
    write_pcap(result.capture.packets, out, link);
    write_label_csv(result.capture, labels_out);
    std::printf("embedded %zu byte(s) in %zu carrier(s); wrote %zu packets to %s\n", payload.size(),
                result.carriers.size(), result.capture.size(), out.c_str());
  }
};

struct ExtractCmd {
  std::string in, labels, channel;
  std::optional<std::size_t> length;
  bool ternary = false;
  int max_hops = kDefaultAssumedMaxHops;
  SecretFlags secret;

  void run() const {
    const LabeledCapture capture = load_capture(in, labels);
    const ChannelKind kind = covert_channel(channel);
    std::vector<Ipv6Packet> carriers;
    for (std::size_t i = 0; i < capture.size(); ++i) {
      if (capture.labels[i] == kind) carriers.push_back(capture.packets[i]);
    }
    if (carriers.empty()) throw Error(Errc::invalid_argument, "no packets labeled " + channel);

    Bytes message;
    switch (kind) {
      case ChannelKind::flow_label:
        message = extract_flowlabel(carriers, secret.resolve(), length).message;
        break;
      case ChannelKind::length:
        message = extract_length(carriers, secret.resolve(), length.value_or(2 * carriers.size()));
        break;
      case ChannelKind::address:
        message = extract_address(carriers, secret.resolve(), length.value_or(8 * carriers.size()));
        break;
      case ChannelKind::hop_limit: {
        const HopLimitAlphabet alphabet{hop_mode(ternary)};
        std::vector<std::uint8_t> symbols;
        for (const auto& s : extract_hoplimit(carriers, alphabet, max_hops)) {
          if (!s) throw Error(Errc::invalid_argument, "hop limit outside every decode range");
          symbols.push_back(*s);
        }
        std::size_t bytes = length.value_or(0);
        if (!length) {
          while (symbols_for_bytes(bytes + 1, alphabet.mode) <= symbols.size()) ++bytes;
        }
        symbols.resize(std::min(symbols.size(), symbols_for_bytes(bytes, alphabet.mode)));
        message = symbols_to_message(symbols, alphabet.mode, bytes);
        break;
      }
      case ChannelKind::normal:
        break;
    }
    std::printf("carriers: %zu\nhex: %s\ntext: %s\n", carriers.size(), to_hex(message).c_str(),
                printable(message).c_str());
  }
};

struct FeaturizeCmd {
  std::string in, labels, out;
  bool normalize = false;
  double train_fraction = 0.75;

  void run() const {
    const LabeledCapture capture = load_capture(in, labels);
    std::vector<FeatureVector> rows = extract_features(capture.packets);
    if (normalize && !rows.empty()) {
      // Fitted on the training prefix only.
      const std::size_t cut = std::max<std::size_t>(1, train_size(rows.size(), train_fraction));
      const auto params = fit_normalization(std::span<const FeatureVector>(rows).first(cut));
      rows = apply_normalization(rows, params);
    }
    write_feature_csv(rows, capture.labels, out);
    std::printf("wrote %zu feature rows to %s\n", rows.size(), out.c_str());
  }
};

struct TrainCmd {
  std::string in, out, model = "rf", task = "binary";
  std::size_t trees = 100, rounds = 100, depth = 0;
  double train_fraction = 0.75, learning_rate = 0.1;
  std::uint64_t seed = 42;

  void run() const {
    const FeatureTable table = read_feature_csv(in);
    const ml::Task t = task == "binary" ? ml::Task::binary : ml::Task::multiclass;
    const std::size_t cut = train_size(table.rows.size(), train_fraction);
    const auto rows = std::span<const FeatureVector>(table.rows);
    const auto labels = ml::class_indices(table.labels, t);
    const ml::Matrix x_train = ml::to_matrix(rows.first(cut));
    const ml::Matrix x_test = ml::to_matrix(rows.subspan(cut));
    const std::span<const int> y_train = std::span<const int>(labels).first(cut);
    const std::span<const int> y_test = std::span<const int>(labels).subspan(cut);

    std::optional<ml::EnsembleModel> trained;
    if (model == "rf") {
      ml::ForestParams params;
      params.trees = trees;
      params.max_depth = depth;
      params.seed = seed;
      trained.emplace(ml::train_random_forest(x_train, y_train, ml::class_count(t), params));
    } else {
      ml::BoostingParams params;
      params.rounds = rounds;
      params.max_depth = depth == 0 ? 3 : depth;
      params.learning_rate = learning_rate;
      params.seed = seed;
      trained.emplace(ml::train_gradient_boosting(x_train, y_train, ml::class_count(t), params));
    }
    trained->save(out);
    std::printf("%s %s model: %zu train rows, %zu held-out rows\n", model.c_str(), task.c_str(), cut,
                table.rows.size() - cut);
    if (!y_test.empty()) print_evaluation(ml::evaluate(trained->predict(x_test), y_test, ml::class_count(t)), t);
  }
};

struct EvaluateCmd {
  std::string model, in;
  void run() const {
    const ml::EnsembleModel m = ml::EnsembleModel::load(model);
    const FeatureTable table = read_feature_csv(in);
    const auto labels = ml::class_indices(table.labels, m.task());
    print_evaluation(ml::evaluate(m.predict(ml::to_matrix(table.rows)), labels, m.class_count()), m.task());
  }
};

struct PipelineCmd {
  std::string binary, multiclass, in, labels, out;
  void run() const {
    const ml::EnsembleModel stage1 = ml::EnsembleModel::load(binary);
    const ml::EnsembleModel stage2 = ml::EnsembleModel::load(multiclass);
    const LabeledCapture capture = load_capture(in, labels);
    const auto verdicts = ml::run_two_stage_pipeline(stage1, stage2, ml::to_matrix(extract_features(capture.packets)));
    std::ofstream csv(out, std::ios::trunc);
    if (!csv) throw Error(Errc::io, "cannot open " + out + " for writing");
    csv << "packet_index,verdict\n";
    std::array<std::size_t, kChannelKindCount> counts{};
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      csv << i << ',' << channel_name(verdicts[i]) << '\n';
      ++counts[static_cast<std::size_t>(verdicts[i])];
    }
    if (!csv) throw Error(Errc::io, "write failed: " + out);
    for (std::size_t k = 0; k < kChannelKindCount; ++k) {
      const auto name = channel_name(static_cast<ChannelKind>(k));
      std::printf("%-10.*s %zu\n", static_cast<int>(name.size()), name.data(), counts[k]);
    }
    if (!labels.empty()) {
      const auto predicted = ml::class_indices(verdicts, ml::Task::multiclass);
      const auto actual = ml::class_indices(capture.labels, ml::Task::multiclass);
      std::cout << '\n';
      print_evaluation(ml::evaluate(predicted, actual, kChannelKindCount), ml::Task::multiclass);
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IPv6 covert channel toolkit"};
  app.require_subcommand(1);

  ProfileCmd profile;
  auto* c_profile = app.add_subcommand("profile", "hop-limit, traffic-class and flow-label statistics");
  c_profile->add_option("--in", profile.in, "capture")->required();
  c_profile->add_option("--out", profile.out, "output directory")->required();

  GenerateCmd generate;
  auto* c_generate = app.add_subcommand("generate", "synthetic background, optionally mixed with covert traffic");
  c_generate->add_option("--out", generate.out, "output pcap")->required();
  c_generate->add_option("--labels", generate.labels, "output label CSV")->required();
  c_generate->add_option("--config", generate.config, "key=value mix file");
  c_generate->add_flag("--desk-scale", generate.desk_scale, "4117/1166/766/758/447 mix");
  c_generate->add_option("--normal", generate.normal, "background packets");
  c_generate->add_option("--hoplimit", generate.hoplimit);
  c_generate->add_option("--address", generate.address);
  c_generate->add_option("--length", generate.length);
  c_generate->add_option("--flowlabel", generate.flowlabel);
  c_generate->add_option("--seed", generate.seed, "overrides the config seed (default 42)");
  generate.secret.attach(c_generate);

  InjectCmd inj;
  auto* c_inject = app.add_subcommand("inject", "embed one message into a capture");
  c_inject->add_option("--in", inj.in, "input pcap")->required();
  c_inject->add_option("--labels", inj.labels, "input label CSV (default: all normal)");
  c_inject->add_option("--channel", inj.channel, "hoplimit|address|length|flowlabel")->required();
  auto* msg = c_inject->add_option("--message", inj.message, "message text");
  auto* msg_file = c_inject->add_option("--message-file", inj.message_file, "message bytes from a file");
  msg->excludes(msg_file);
  c_inject->add_option("--out", inj.out, "output pcap")->required();
  c_inject->add_option("--labels-out", inj.labels_out, "output label CSV")->required();
  c_inject->add_option("--seed", inj.seed);
  c_inject->add_flag("--ternary", inj.ternary, "hop-limit alphabet 64/128/255");
  inj.secret.attach(c_inject);

  ExtractCmd ext;
  auto* c_extract = app.add_subcommand("extract", "recover a message from the labeled carriers");
  c_extract->add_option("--in", ext.in, "pcap")->required();
  c_extract->add_option("--labels", ext.labels, "label CSV marking the carriers")->required();
  c_extract->add_option("--channel", ext.channel)->required();
  c_extract->add_option("--length", ext.length, "message length in bytes");
  c_extract->add_flag("--ternary", ext.ternary);
  c_extract->add_option("--max-hops", ext.max_hops, "largest hop-limit decrement tolerated");
  ext.secret.attach(c_extract);

  FeaturizeCmd feat;
  auto* c_feat = app.add_subcommand("featurize", "per-packet feature CSV");
  c_feat->add_option("--in", feat.in, "pcap")->required();
  c_feat->add_option("--labels", feat.labels, "label CSV (default: all normal)");
  c_feat->add_option("--out", feat.out, "feature CSV")->required();
  c_feat->add_flag("--normalize", feat.normalize, "min-max scale, fitted on the training prefix");
  c_feat->add_option("--train-fraction", feat.train_fraction);

  TrainCmd train;
  auto* c_train = app.add_subcommand("train", "train on the first part of a feature CSV, report on the rest");
  c_train->add_option("--in", train.in, "feature CSV")->required();
  c_train->add_option("--out", train.out, "model file")->required();
  c_train->add_option("--model", train.model)->check(CLI::IsMember({"rf", "gb"}));
  c_train->add_option("--task", train.task)->check(CLI::IsMember({"binary", "multiclass"}));
  c_train->add_option("--trees", train.trees);
  c_train->add_option("--rounds", train.rounds);
  c_train->add_option("--depth", train.depth, "0: unlimited (rf) / 3 (gb)");
  c_train->add_option("--learning-rate", train.learning_rate);
  c_train->add_option("--train-fraction", train.train_fraction);
  c_train->add_option("--seed", train.seed);

  EvaluateCmd eval;
  auto* c_eval = app.add_subcommand("evaluate", "confusion matrix and metrics of a model on a feature CSV");
  c_eval->add_option("--model", eval.model)->required();
  c_eval->add_option("--in", eval.in, "feature CSV")->required();

  PipelineCmd pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "two-stage detection over a capture");
  c_pipe->add_option("--binary", pipe.binary, "binary model")->required();
  c_pipe->add_option("--multiclass", pipe.multiclass, "multiclass model")->required();
  c_pipe->add_option("--in", pipe.in, "pcap")->required();
  c_pipe->add_option("--labels", pipe.labels, "label CSV; adds metrics to the output");
  c_pipe->add_option("--out", pipe.out, "verdict CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_profile) profile.run();
    if (*c_generate) generate.run();
    if (*c_inject) {
      if (inj.message.empty() && inj.message_file.empty()) {
        throw Error(Errc::invalid_argument, "pass --message or --message-file");
      }
      inj.run();
    }
    if (*c_extract) ext.run();
    if (*c_feat) feat.run();
    if (*c_train) train.run();
    if (*c_eval) eval.run();
    if (*c_pipe) pipe.run();
  } catch (const Error& e) {
    std::fprintf(stderr, "v6covert: %.*s: %s\n", static_cast<int>(errc_name(e.code()).size()),
                 errc_name(e.code()).data(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "v6covert: %s\n", e.what());
    return 1;
  }
  return 0;
}
