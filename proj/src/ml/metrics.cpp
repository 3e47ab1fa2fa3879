#include "v6covert/ml/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "v6covert/error.hpp"

namespace v6covert::ml {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::tp(std::size_t c) const { return at(c, c); }

std::size_t ConfusionMatrix::fp(std::size_t c) const {
  std::size_t sum = 0;
  for (std::size_t a = 0; a < class_count; ++a) {
    if (a != c) sum += at(a, c);
  }
  return sum;
}

std::size_t ConfusionMatrix::fn(std::size_t c) const {
  std::size_t sum = 0;
  for (std::size_t p = 0; p < class_count; ++p) {
    if (p != c) sum += at(c, p);
  }
  return sum;
}

std::size_t ConfusionMatrix::tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  m.support = tp + fn;
  m.present = tp + fp + fn > 0;
  return m;
}

Evaluation evaluate(std::span<const int> predictions, std::span<const int> actuals, std::size_t class_count) {
  if (predictions.size() != actuals.size()) {
    throw Error(Errc::invalid_argument, "predictions and actuals differ in length");
  }
  Evaluation result;
  ConfusionMatrix& cm = result.confusion;
  cm.class_count = class_count;
  cm.counts.assign(class_count * class_count, 0);
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    const int a = actuals[i], p = predictions[i];
    if (a < 0 || p < 0 || static_cast<std::size_t>(a) >= class_count || static_cast<std::size_t>(p) >= class_count) {
      throw Error(Errc::invalid_argument, "label out of range at position " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(a) * class_count + static_cast<std::size_t>(p)];
  }

  MetricsReport& report = result.metrics;
  std::size_t present = 0, correct = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    const ClassMetrics m = class_metrics(cm.tp(c), cm.fp(c), cm.fn(c));
    report.per_class.push_back(m);
    correct += cm.tp(c);
    if (!m.present) continue;
    ++present;
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
  }
  if (present > 0) {
    report.macro_precision /= static_cast<double>(present);
    report.macro_recall /= static_cast<double>(present);
    report.macro_f1 /= static_cast<double>(present);
  }
  report.accuracy = actuals.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(actuals.size());
  return result;
}

std::string format_confusion(const ConfusionMatrix& confusion, std::span<const std::string_view> names) {
  std::string out = "actual\\predicted";
  for (std::size_t p = 0; p < confusion.class_count; ++p) {
    out += ',';
    out += names[p];
  }
  out += '\n';
  for (std::size_t a = 0; a < confusion.class_count; ++a) {
    out += names[a];
    for (std::size_t p = 0; p < confusion.class_count; ++p) out += ',' + std::to_string(confusion.at(a, p));
    out += '\n';
  }
  return out;
}

std::string format_metrics(const MetricsReport& report, std::span<const std::string_view> names) {
  char line[160];
  std::string out = "class        precision  recall     f1         support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    std::snprintf(line, sizeof line, "%-12.*s %-10.4f %-10.4f %-10.4f %zu\n", static_cast<int>(names[c].size()),
                  names[c].data(), m.precision, m.recall, m.f1, m.support);
    out += line;
  }
  std::snprintf(line, sizeof line, "macro        %-10.4f %-10.4f %-10.4f\naccuracy     %.4f\n",
                report.macro_precision, report.macro_recall, report.macro_f1, report.accuracy);
  out += line;
  return out;
}

}  // namespace v6covert::ml
