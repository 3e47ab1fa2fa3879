#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v6covert/ml/matrix.hpp"
#include "v6covert/rng.hpp"

namespace v6covert::ml {

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // rows with x[feature] <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  // Leaves only: weighted class distribution (classification) or a single
  // additive output (regression).
  std::vector<double> value;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t max_depth = 0;    // 0 = unlimited

  const std::vector<double>& leaf_value(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;
  // Throws Error{model_load} when child links are invalid or a leaf is empty.
  void validate(std::size_t feature_count, bool distribution_leaves) const;

  bool operator==(const DecisionTree&) const = default;
};

struct TreeParams {
  std::size_t max_depth = 0;  // 0 = grow until pure
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // features drawn per split; 0 = all
};

// Weighted-Gini classification tree. Rows with weight 0 are ignored; the
// weight carries both bootstrap multiplicity and class weight.
DecisionTree train_classification_tree(const Matrix& x, std::span<const int> y,
                                       std::span<const double> weights, std::size_t class_count,
                                       const TreeParams& params, Rng& rng);

// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

}  // namespace v6covert::ml
