#include "v6covert/ml/model.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "v6covert/error.hpp"

namespace v6covert::ml {

using nlohmann::json;

std::string_view task_name(Task task) { return task == Task::binary ? "binary" : "multiclass"; }

std::size_t class_count(Task task) { return task == Task::binary ? 2 : kChannelKindCount; }

int class_index(ChannelKind label, Task task) {
  if (task == Task::binary) return label == ChannelKind::normal ? 0 : 1;
  return static_cast<int>(label);
}

std::vector<int> class_indices(std::span<const ChannelKind> labels, Task task) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto label : labels) out.push_back(class_index(label, task));
  return out;
}

std::vector<std::string_view> class_names(Task task) {
  if (task == Task::binary) return {"normal", "covert"};
  std::vector<std::string_view> names;
  for (std::size_t k = 0; k < kChannelKindCount; ++k) names.push_back(channel_name(static_cast<ChannelKind>(k)));
  return names;
}

Matrix to_matrix(std::span<const FeatureVector> rows) {
  Matrix x(rows.size(), kFeatureCount);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), x.row(r).begin());
  return x;
}

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::random_forest ? "random_forest" : "gradient_boosting";
}

ModelKind EnsembleModel::kind() const {
  return forest() ? ModelKind::random_forest : ModelKind::gradient_boosting;
}

std::size_t EnsembleModel::feature_count() const {
  return std::visit([](const auto& m) { return m.feature_count; }, model_);
}

std::size_t EnsembleModel::class_count() const {
  return std::visit([](const auto& m) { return m.class_count; }, model_);
}

std::vector<int> EnsembleModel::predict(const Matrix& x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

// ---- JSON ------------------------------------------------------------------

namespace {

json tree_to_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const TreeNode& node : tree.nodes) {
    if (node.is_leaf()) {
      nodes.push_back({{"value", node.value}});
    } else {
      nodes.push_back({{"feature", node.feature}, {"threshold", node.threshold}, {"left", node.left}, {"right", node.right}});
    }
  }
  return {{"max_depth", tree.max_depth}, {"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree tree;
  tree.max_depth = j.at("max_depth").get<std::size_t>();
  for (const json& n : j.at("nodes")) {
    TreeNode node;
    if (n.contains("value")) {
      node.value = n.at("value").get<std::vector<double>>();
    } else {
      node.feature = n.at("feature").get<std::int32_t>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<std::int32_t>();
      node.right = n.at("right").get<std::int32_t>();
      if (node.feature < 0) throw Error(Errc::model_load, "negative split feature");
    }
    tree.nodes.push_back(std::move(node));
  }
  return tree;
}

json trees_to_json(const std::vector<DecisionTree>& trees) {
  json out = json::array();
  for (const auto& t : trees) out.push_back(tree_to_json(t));
  return out;
}

}  // namespace

std::string EnsembleModel::to_json() const {
  json doc;
  doc["format"] = "v6covert-model";
  doc["version"] = kModelFormatVersion;
  doc["kind"] = model_kind_name(kind());
  doc["task"] = task_name(task());
  doc["feature_count"] = feature_count();
  doc["class_count"] = class_count();
  if (const auto* rf = forest()) {
    doc["params"] = {{"trees", rf->trees.size()}, {"feature_subsample", rf->feature_subsample}, {"seed", rf->seed}};
    doc["class_weights"] = rf->class_weights;
    doc["trees"] = trees_to_json(rf->trees);
  } else {
    const auto* gb = boosting();
    doc["params"] = {{"rounds", gb->rounds},
                     {"learning_rate", gb->learning_rate},
                     {"max_depth", gb->max_depth},
                     {"seed", gb->seed}};
    doc["base_score"] = gb->base_score;
    doc["train_loss"] = gb->train_loss;
    doc["trees"] = trees_to_json(gb->stages);
  }
  return doc.dump(1) + "\n";
}

EnsembleModel EnsembleModel::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "v6covert-model") {
      throw Error(Errc::model_load, "not a model file");
    }
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(Errc::model_load, "unsupported model version " + std::to_string(version));
    }
    const auto kind = doc.at("kind").get<std::string>();
    const auto features = doc.at("feature_count").get<std::size_t>();
    const auto classes = doc.at("class_count").get<std::size_t>();
    if (classes < 2) throw Error(Errc::model_load, "class_count below 2");
    const json& params = doc.at("params");
    std::vector<DecisionTree> trees;
    for (const json& t : doc.at("trees")) trees.push_back(tree_from_json(t));

    if (kind == "random_forest") {
      RandomForestModel rf;
      rf.feature_count = features;
      rf.class_count = classes;
      rf.feature_subsample = params.at("feature_subsample").get<std::size_t>();
      rf.seed = params.at("seed").get<std::uint64_t>();
      rf.class_weights = doc.at("class_weights").get<std::vector<double>>();
      if (rf.class_weights.size() != classes) throw Error(Errc::model_load, "class_weights size mismatch");
      for (const auto& tree : trees) {
        tree.validate(features, true);
        for (const auto& node : tree.nodes) {
          if (node.is_leaf() && node.value.size() != classes) throw Error(Errc::model_load, "leaf size mismatch");
        }
      }
      rf.trees = std::move(trees);
      return EnsembleModel(std::move(rf));
    }
    if (kind == "gradient_boosting") {
      GradientBoostingModel gb;
      gb.feature_count = features;
      gb.class_count = classes;
      gb.rounds = params.at("rounds").get<std::size_t>();
      gb.learning_rate = params.at("learning_rate").get<double>();
      gb.max_depth = params.at("max_depth").get<std::size_t>();
      gb.seed = params.at("seed").get<std::uint64_t>();
      gb.base_score = doc.at("base_score").get<std::vector<double>>();
      gb.train_loss = doc.at("train_loss").get<std::vector<double>>();
      if (gb.base_score.size() != gb.trees_per_round()) throw Error(Errc::model_load, "base_score size mismatch");
      if (trees.size() != gb.rounds * gb.trees_per_round()) throw Error(Errc::model_load, "stage count mismatch");
      for (const auto& tree : trees) {
        tree.validate(features, false);
        for (const auto& node : tree.nodes) {
          if (node.is_leaf() && node.value.size() != 1) throw Error(Errc::model_load, "leaf size mismatch");
        }
      }
      gb.stages = std::move(trees);
      return EnsembleModel(std::move(gb));
    }
    throw Error(Errc::model_load, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::model_load, std::string("corrupt model file: ") + e.what());
  }
}

void EnsembleModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << to_json();
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

EnsembleModel EnsembleModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

// ---- pipeline --------------------------------------------------------------

std::vector<ChannelKind> run_two_stage_pipeline(const EnsembleModel& binary, const EnsembleModel& multiclass,
                                                const Matrix& x) {
  if (binary.task() != Task::binary) throw Error(Errc::dimension_mismatch, "first stage must be a binary model");
  if (multiclass.class_count() != kChannelKindCount) {
    throw Error(Errc::dimension_mismatch, "second stage must be a " + std::to_string(kChannelKindCount) + "-class model");
  }
  if (binary.feature_count() != multiclass.feature_count()) {
    throw Error(Errc::dimension_mismatch, "stage models were trained on different feature spaces");
  }
  const std::vector<int> stage1 = binary.predict(x);
  std::vector<ChannelKind> out(x.rows(), ChannelKind::normal);

  std::vector<std::size_t> flagged;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (stage1[r] == 1) flagged.push_back(r);
  }
  Matrix suspects(flagged.size(), x.cols());
  for (std::size_t k = 0; k < flagged.size(); ++k) {
    const auto row = x.row(flagged[k]);
    std::copy(row.begin(), row.end(), suspects.row(k).begin());
  }
  const std::vector<int> stage2 = multiclass.predict(suspects);
  for (std::size_t k = 0; k < flagged.size(); ++k) out[flagged[k]] = static_cast<ChannelKind>(stage2[k]);
  return out;
}

}  // namespace v6covert::ml
