#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "v6covert/ml/decision_tree.hpp"
#include "v6covert/ml/matrix.hpp"

namespace v6covert::ml {

struct BoostingParams {
  std::size_t rounds = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_samples_leaf = 1;
  std::uint64_t seed = 42;
};

// Binary models (class_count 2) hold one tree per round on the log-odds;
// multiclass models hold class_count trees per round, round-major, on the
// softmax logits.
struct GradientBoostingModel {
  std::size_t feature_count = 0;
  std::size_t class_count = 0;
  std::size_t rounds = 0;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::uint64_t seed = 0;
  std::vector<double> base_score;  // 1 entry (binary) or class_count entries
  std::vector<DecisionTree> stages;
  // Mean training log-loss after 0, 1, ..., rounds rounds.
  std::vector<double> train_loss;

  std::size_t trees_per_round() const { return class_count == 2 ? 1 : class_count; }
  // Raw scores after the first `rounds` rounds (all when omitted).
  Matrix decision_function(const Matrix& x) const;
  Matrix decision_function(const Matrix& x, std::size_t rounds) const;
  Matrix predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;

  bool operator==(const GradientBoostingModel&) const = default;
};

// Mean log-loss of raw scores (log-odds for binary, logits otherwise).
double log_loss(const Matrix& raw, std::span<const int> y, std::size_t class_count);

GradientBoostingModel train_gradient_boosting(const Matrix& x, std::span<const int> y,
                                              std::size_t class_count, const BoostingParams& params = {});

}  // namespace v6covert::ml
