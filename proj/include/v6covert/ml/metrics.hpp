#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace v6covert::ml {

// Rows are actual classes, columns predicted.
struct ConfusionMatrix {
  std::size_t class_count = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t actual, std::size_t predicted) const { return counts[actual * class_count + predicted]; }
  std::size_t total() const;
  std::size_t tp(std::size_t c) const;
  std::size_t fp(std::size_t c) const;
  std::size_t fn(std::size_t c) const;
  std::size_t tn(std::size_t c) const;

  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // actual count
  bool present = false;     // appears among actuals or predictions

  bool operator==(const ClassMetrics&) const = default;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  // Unweighted means over the present classes.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

// Precision TP/(TP+FP), recall TP/(TP+FN), F1 2PR/(P+R); each 0 when its
// denominator is 0.
ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn);

struct Evaluation {
  ConfusionMatrix confusion;
  MetricsReport metrics;
};

// Throws Error{invalid_argument} on length mismatch or out-of-range labels.
Evaluation evaluate(std::span<const int> predictions, std::span<const int> actuals, std::size_t class_count);

std::string format_confusion(const ConfusionMatrix& confusion, std::span<const std::string_view> names);
std::string format_metrics(const MetricsReport& report, std::span<const std::string_view> names);

}  // namespace v6covert::ml
