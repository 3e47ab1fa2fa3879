#include "v6covert/ml/random_forest.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "v6covert/error.hpp"
#include "v6covert/rng.hpp"

namespace v6covert::ml {

std::vector<double> balanced_class_weights(std::span<const int> y, std::size_t class_count) {
  std::vector<std::size_t> counts(class_count, 0);
  for (const int label : y) ++counts.at(static_cast<std::size_t>(label));
  const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
  std::vector<double> weights(class_count, 0.0);
  for (std::size_t k = 0; k < class_count; ++k) {
    if (counts[k] > 0) weights[k] = static_cast<double>(y.size()) / (present * static_cast<double>(counts[k]));
  }
  return weights;
}

RandomForestModel train_random_forest(const Matrix& x, std::span<const int> y, std::size_t class_count,
                                      const ForestParams& params) {
  if (y.size() != x.rows()) throw Error(Errc::dimension_mismatch, "feature rows and labels differ in count");
  if (x.rows() == 0) throw Error(Errc::degenerate_training, "empty training set");
  for (const int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
      throw Error(Errc::invalid_argument, "class label out of range");
    }
  }
  RandomForestModel model;
  model.feature_count = x.cols();
  model.class_count = class_count;
  model.feature_subsample = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
  model.seed = params.seed;
  model.class_weights = balanced_class_weights(y, class_count);
  if (std::count_if(model.class_weights.begin(), model.class_weights.end(), [](double w) { return w > 0; }) < 2) {
    throw Error(Errc::degenerate_training, "training labels contain fewer than two classes");
  }

  TreeParams tree_params;
  tree_params.max_depth = params.max_depth;
  tree_params.min_samples_leaf = params.min_samples_leaf;
  tree_params.max_features = model.feature_subsample;

  model.trees.resize(params.trees);
  const std::size_t n = x.rows();
  parallel_for(params.trees, params.threads, [&](std::size_t t) {
    Rng rng(mix_seed(params.seed, t));
    std::vector<double> weights(n, 0.0);
    for (std::size_t draw = 0; draw < n; ++draw) weights[rng.below(n)] += 1.0;
    for (std::size_t i = 0; i < n; ++i) weights[i] *= model.class_weights[static_cast<std::size_t>(y[i])];
    model.trees[t] = train_classification_tree(x, y, weights, class_count, tree_params, rng);
  });
  return model;
}

Matrix RandomForestModel::predict_scores(const Matrix& x) const {
  if (x.cols() != feature_count) {
    throw Error(Errc::dimension_mismatch, "model expects " + std::to_string(feature_count) + " features, got " +
                                              std::to_string(x.cols()));
  }
  Matrix scores(x.rows(), class_count);
  if (trees.empty()) return scores;
  const double vote = 1.0 / static_cast<double>(trees.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    // Count votes as integers so the result cannot depend on tree order.
    std::vector<std::size_t> votes(class_count, 0);
    for (const DecisionTree& tree : trees) ++votes[argmax(tree.leaf_value(row))];
    for (std::size_t k = 0; k < class_count; ++k) scores(r, k) = static_cast<double>(votes[k]) * vote;
  }
  return scores;
}

std::vector<int> RandomForestModel::predict(const Matrix& x) const {
  const Matrix scores = predict_scores(x);
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = static_cast<int>(argmax(scores.row(r)));
  return out;
}

}  // namespace v6covert::ml
