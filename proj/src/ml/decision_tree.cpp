#include "v6covert/ml/decision_tree.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <utility>

#include "v6covert/error.hpp"

namespace v6covert::ml {

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

const std::vector<double>& DecisionTree::leaf_value(std::span<const double> x) const {
  std::size_t n = 0;
  while (!nodes[n].is_leaf()) {
    const TreeNode& node = nodes[n];
    n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return nodes[n].value;
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    const auto [n, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[n].is_leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[n].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[n].right), d + 1);
    }
  }
  return deepest;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void DecisionTree::validate(std::size_t feature_count, bool distribution_leaves) const {
  if (nodes.empty()) throw Error(Errc::model_load, "tree has no nodes");
  const auto count = static_cast<std::int32_t>(nodes.size());
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const TreeNode& node = nodes[n];
    const std::string where = "node " + std::to_string(n) + ": ";
    if (node.is_leaf()) {
      if (node.value.empty()) throw Error(Errc::model_load, where + "leaf without value");
      if (distribution_leaves) {
        double sum = 0.0;
        for (const double v : node.value) {
          if (!(v >= 0.0)) throw Error(Errc::model_load, where + "negative class weight");
          sum += v;
        }
        if (!(sum > 0.0)) throw Error(Errc::model_load, where + "empty class distribution");
      }
      continue;
    }
    // Children always follow their parent, which also rules out cycles.
    if (static_cast<std::size_t>(node.feature) >= feature_count || node.left <= static_cast<std::int32_t>(n) ||
        node.right <= static_cast<std::int32_t>(n) || node.left >= count || node.right >= count) {
      throw Error(Errc::model_load, where + "invalid split");
    }
  }
}

namespace {

class ClassificationBuilder {
 public:
  ClassificationBuilder(const Matrix& x, std::span<const int> y, std::span<const double> w, std::size_t k,
                        const TreeParams& params, Rng& rng)
      : x_(x), y_(y), w_(w), k_(k), params_(params), rng_(rng) {
    features_.resize(x.cols());
    std::iota(features_.begin(), features_.end(), 0);
    mtry_ = params.max_features == 0 ? x.cols() : std::min(params.max_features, x.cols());
  }

  DecisionTree build() {
    std::vector<std::uint32_t> rows;
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      if (w_[i] > 0.0) rows.push_back(static_cast<std::uint32_t>(i));
    }
    tree_.max_depth = params_.max_depth;
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -1.0;  // sum over children of (sum of squared class weights) / weight
  };

  std::vector<double> distribution(const std::vector<std::uint32_t>& rows) const {
    std::vector<double> dist(k_, 0.0);
    for (const auto i : rows) dist[static_cast<std::size_t>(y_[i])] += w_[i];
    return dist;
  }

  std::int32_t grow(std::vector<std::uint32_t>& rows, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<double> dist = distribution(rows);
    const std::size_t nonzero = static_cast<std::size_t>(std::count_if(dist.begin(), dist.end(), [](double d) { return d > 0; }));
    const bool depth_reached = params_.max_depth > 0 && depth >= params_.max_depth;
    std::optional<Split> split;
    if (nonzero > 1 && !depth_reached && rows.size() >= params_.min_samples_split) split = best_split(rows);
    if (!split) {
      tree_.nodes[static_cast<std::size_t>(index)].value = std::move(dist);
      return index;
    }
    std::vector<std::uint32_t> left, right;
    for (const auto i : rows) {
      (x_(i, split->feature) <= split->threshold ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    const std::int32_t l = grow(left, depth + 1);
    const std::int32_t r = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  // Features are drawn without replacement until mtry_ non-constant ones
  // have been evaluated.
  std::optional<Split> best_split(const std::vector<std::uint32_t>& rows) {
    std::optional<Split> best;
    std::size_t tried = 0;
    std::vector<std::pair<double, std::uint32_t>> sorted(rows.size());
    std::vector<double> left(k_), right(k_);
    const std::vector<double> total = distribution(rows);
    for (std::size_t drawn = 0; drawn < features_.size() && tried < mtry_; ++drawn) {
      std::swap(features_[drawn], features_[drawn + rng_.below(features_.size() - drawn)]);
      const std::size_t f = features_[drawn];
      for (std::size_t r = 0; r < rows.size(); ++r) sorted[r] = {x_(rows[r], f), rows[r]};
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;
      ++tried;

      std::fill(left.begin(), left.end(), 0.0);
      right = total;
      double wl = 0.0, wr = std::accumulate(total.begin(), total.end(), 0.0);
      for (std::size_t r = 0; r + 1 < sorted.size(); ++r) {
        const auto i = sorted[r].second;
        const auto c = static_cast<std::size_t>(y_[i]);
        left[c] += w_[i];
        right[c] -= w_[i];
        wl += w_[i];
        wr -= w_[i];
        if (sorted[r].first == sorted[r + 1].first) continue;
        if (r + 1 < params_.min_samples_leaf || sorted.size() - r - 1 < params_.min_samples_leaf) continue;
        double sl = 0.0, sr = 0.0;
        for (std::size_t k = 0; k < k_; ++k) {
          sl += left[k] * left[k];
          sr += right[k] * right[k];
        }
        const double score = (wl > 0 ? sl / wl : 0.0) + (wr > 0 ? sr / wr : 0.0);
        if (!best || score > best->score) {
          double threshold = sorted[r].first + (sorted[r + 1].first - sorted[r].first) / 2;
          if (!(threshold < sorted[r + 1].first)) threshold = sorted[r].first;
          best = Split{f, threshold, score};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  std::size_t k_;
  const TreeParams& params_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::size_t mtry_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree train_classification_tree(const Matrix& x, std::span<const int> y,
                                       std::span<const double> weights, std::size_t class_count,
                                       const TreeParams& params, Rng& rng) {
  if (y.size() != x.rows() || weights.size() != x.rows()) {
    throw Error(Errc::dimension_mismatch, "rows, labels and weights differ in count");
  }
  for (const int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
      throw Error(Errc::invalid_argument, "class label out of range");
    }
  }
  if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) {
    throw Error(Errc::degenerate_training, "no row carries positive weight");
  }
  return ClassificationBuilder(x, y, weights, class_count, params, rng).build();
}

}  // namespace v6covert::ml
