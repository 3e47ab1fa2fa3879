#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v6covert/ml/decision_tree.hpp"
#include "v6covert/ml/matrix.hpp"

namespace v6covert::ml {

struct ForestParams {
  std::size_t trees = 100;
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;
  std::uint64_t seed = 42;
  std::size_t threads = 0;  // 0 = hardware concurrency; never changes the result
};

struct RandomForestModel {
  std::size_t feature_count = 0;
  std::size_t class_count = 0;
  std::size_t feature_subsample = 0;  // floor(sqrt(feature_count))
  std::uint64_t seed = 0;
  std::vector<double> class_weights;  // n / (K * count_k); 0 for absent classes
  std::vector<DecisionTree> trees;

  // rows x class_count matrix of vote fractions.
  Matrix predict_scores(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;

  bool operator==(const RandomForestModel&) const = default;
};

// Inverse-frequency weights over the classes present in `y`.
std::vector<double> balanced_class_weights(std::span<const int> y, std::size_t class_count);

// Throws Error{degenerate_training} for fewer than two classes and
// Error{dimension_mismatch} when x and y disagree.
RandomForestModel train_random_forest(const Matrix& x, std::span<const int> y, std::size_t class_count,
                                      const ForestParams& params = {});

}  // namespace v6covert::ml
