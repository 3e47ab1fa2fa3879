#include "v6covert/ml/gradient_boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "v6covert/error.hpp"

namespace v6covert::ml {

namespace {

constexpr double kMinGain = 1e-12;
constexpr double kMaxLeaf = 10.0;  // cap on a Newton step before shrinkage
constexpr int kMaxHalvings = 40;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void softmax(std::span<const double> z, std::span<double> out) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += out[k] = std::exp(z[k] - top);
  for (auto& p : out) p /= sum;
}

// Depth-limited least-squares tree on residuals `g`, grown level by level
// over feature orders computed once per training run. Leaves hold the
// Newton step scale * sum(g) / sum(h).
class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& order,
                        std::span<const double> g, std::span<const double> h, std::size_t max_depth,
                        std::size_t min_leaf, double scale)
      : x_(x), order_(order), g_(g), h_(h), max_depth_(max_depth), min_leaf_(std::max<std::size_t>(1, min_leaf)),
        scale_(scale) {}

  DecisionTree build() {
    const std::size_t n = x_.rows();
    node_of_.assign(n, 0);
    tree_.max_depth = max_depth_;
    tree_.nodes.emplace_back();
    stats_.push_back(sums_for(0));
    std::vector<std::size_t> active{0};

    for (std::size_t depth = 0; depth < max_depth_ && !active.empty(); ++depth) {
      std::vector<std::int64_t> slot_of(tree_.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) slot_of[active[s]] = static_cast<std::int64_t>(s);
      std::vector<Candidate> best(active.size());

      for (std::size_t f = 0; f < x_.cols(); ++f) {
        std::vector<Sweep> sweep(active.size());
        for (const auto i : order_[f]) {
          const std::int64_t slot = slot_of[node_of_[i]];
          if (slot < 0) continue;
          Sweep& st = sweep[static_cast<std::size_t>(slot)];
          const Stats& total = stats_[active[static_cast<std::size_t>(slot)]];
          const double v = x_(i, f);
          if (st.count > 0 && v > st.last && st.count >= min_leaf_ && total.count - st.count >= min_leaf_) {
            const double gr = total.g - st.g;
            const auto nl = static_cast<double>(st.count);
            const auto nr = static_cast<double>(total.count - st.count);
            const double gain = st.g * st.g / nl + gr * gr / nr - total.g * total.g / static_cast<double>(total.count);
            Candidate& b = best[static_cast<std::size_t>(slot)];
            if (gain > kMinGain && gain > b.gain) {
              double threshold = st.last + (v - st.last) / 2;
              if (!(threshold < v)) threshold = st.last;
              b = {gain, f, threshold, true};
            }
          }
          st.g += g_[i];
          ++st.count;
          st.last = v;
        }
      }

      std::vector<std::size_t> next;
      std::vector<std::pair<std::int32_t, std::int32_t>> children(tree_.nodes.size(), {-1, -1});
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (!best[s].valid) continue;
        const std::size_t parent = active[s];
        const auto l = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        tree_.nodes.emplace_back();
        TreeNode& node = tree_.nodes[parent];
        node.feature = static_cast<std::int32_t>(best[s].feature);
        node.threshold = best[s].threshold;
        node.left = l;
        node.right = l + 1;
        children[parent] = {l, l + 1};
        next.push_back(static_cast<std::size_t>(l));
        next.push_back(static_cast<std::size_t>(l + 1));
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t nd = node_of_[i];
        if (nd >= children.size() || children[nd].first < 0) continue;
        const TreeNode& node = tree_.nodes[nd];
        node_of_[i] = static_cast<std::size_t>(x_(i, static_cast<std::size_t>(node.feature)) <= node.threshold
                                                   ? node.left
                                                   : node.right);
      }
      stats_.resize(tree_.nodes.size());
      for (const std::size_t nd : next) stats_[nd] = Stats{};
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t nd = node_of_[i];
        if (std::find(next.begin(), next.end(), nd) == next.end()) continue;
        stats_[nd].g += g_[i];
        stats_[nd].h += h_[i];
        ++stats_[nd].count;
      }
      active = std::move(next);
    }

    for (std::size_t nd = 0; nd < tree_.nodes.size(); ++nd) {
      TreeNode& node = tree_.nodes[nd];
      if (!node.is_leaf()) continue;
      const double step = scale_ * stats_[nd].g / std::max(stats_[nd].h, 1e-12);
      node.value = {std::clamp(step, -kMaxLeaf, kMaxLeaf)};
    }
    return std::move(tree_);
  }

 private:
  struct Stats {
    double g = 0.0;
    double h = 0.0;
    std::size_t count = 0;
  };
  struct Sweep {
    double g = 0.0;
    std::size_t count = 0;
    double last = 0.0;
  };
  struct Candidate {
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
    bool valid = false;
  };

  Stats sums_for(std::size_t nd) const {
    Stats s;
    for (std::size_t i = 0; i < x_.rows(); ++i) {
      if (node_of_[i] != nd) continue;
      s.g += g_[i];
      s.h += h_[i];
      ++s.count;
    }
    return s;
  }

  const Matrix& x_;
  const std::vector<std::vector<std::uint32_t>>& order_;
  std::span<const double> g_;
  std::span<const double> h_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  double scale_;
  std::vector<std::size_t> node_of_;
  std::vector<Stats> stats_;
  DecisionTree tree_;
};

void scale_leaves(DecisionTree& tree, double factor) {
  for (auto& node : tree.nodes) {
    if (node.is_leaf()) node.value[0] *= factor;
  }
}

}  // namespace

double log_loss(const Matrix& raw, std::span<const int> y, std::size_t class_count) {
  if (raw.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    if (class_count == 2) {
      const double z = raw(i, 0);
      // log(1 + e^z) - y z, evaluated without overflow
      total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - (y[i] == 1 ? z : 0.0);
    } else {
      const auto row = raw.row(i);
      const double top = *std::max_element(row.begin(), row.end());
      double sum = 0.0;
      for (const double z : row) sum += std::exp(z - top);
      total += top + std::log(sum) - row[static_cast<std::size_t>(y[i])];
    }
  }
  return total / static_cast<double>(raw.rows());
}

Matrix GradientBoostingModel::decision_function(const Matrix& x) const { return decision_function(x, rounds); }

Matrix GradientBoostingModel::decision_function(const Matrix& x, std::size_t upto) const {
  if (x.cols() != feature_count) {
    throw Error(Errc::dimension_mismatch, "model expects " + std::to_string(feature_count) + " features, got " +
                                              std::to_string(x.cols()));
  }
  const std::size_t per_round = trees_per_round();
  Matrix raw(x.rows(), per_round);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < per_round; ++k) raw(i, k) = base_score[k];
  }
  const std::size_t stage_count = std::min(upto, rounds) * per_round;
  for (std::size_t s = 0; s < stage_count; ++s) {
    const std::size_t k = s % per_round;
    for (std::size_t i = 0; i < x.rows(); ++i) raw(i, k) += stages[s].leaf_value(x.row(i))[0];
  }
  return raw;
}

Matrix GradientBoostingModel::predict_proba(const Matrix& x) const {
  const Matrix raw = decision_function(x);
  Matrix proba(x.rows(), class_count);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (class_count == 2) {
      const double p = sigmoid(raw(i, 0));
      proba(i, 0) = 1.0 - p;
      proba(i, 1) = p;
    } else {
      softmax(raw.row(i), proba.row(i));
    }
  }
  return proba;
}

std::vector<int> GradientBoostingModel::predict(const Matrix& x) const {
  std::vector<int> out(x.rows());
  if (class_count == 2) {
    // Ties at log-odds 0 go to class 0.
    const Matrix raw = decision_function(x);
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = raw(i, 0) > 0.0 ? 1 : 0;
    return out;
  }
  const Matrix raw = decision_function(x);
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = static_cast<int>(argmax(raw.row(i)));
  return out;
}

GradientBoostingModel train_gradient_boosting(const Matrix& x, std::span<const int> y, std::size_t class_count,
                                              const BoostingParams& params) {
  if (y.size() != x.rows()) throw Error(Errc::dimension_mismatch, "feature rows and labels differ in count");
  if (x.rows() == 0) throw Error(Errc::degenerate_training, "empty training set");
  if (class_count < 2) throw Error(Errc::invalid_argument, "need at least two classes");
  if (!(params.learning_rate > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be positive");
  std::vector<std::size_t> counts(class_count, 0);
  for (const int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
      throw Error(Errc::invalid_argument, "class label out of range");
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw Error(Errc::degenerate_training, "training labels contain fewer than two classes");
  }

  const std::size_t n = x.rows();
  GradientBoostingModel model;
  model.feature_count = x.cols();
  model.class_count = class_count;
  model.learning_rate = params.learning_rate;
  model.max_depth = params.max_depth;
  model.seed = params.seed;
  const std::size_t per_round = model.trees_per_round();

  auto prior = [&](std::size_t k) {
    return std::max(static_cast<double>(counts[k]) / static_cast<double>(n), 1e-12);
  };
  if (class_count == 2) {
    model.base_score = {std::log(prior(1) / prior(0))};
  } else {
    for (std::size_t k = 0; k < class_count; ++k) model.base_score.push_back(std::log(prior(k)));
  }

  std::vector<std::vector<std::uint32_t>> order(x.cols(), std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::iota(order[f].begin(), order[f].end(), 0);
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }

  Matrix raw(n, per_round);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < per_round; ++k) raw(i, k) = model.base_score[k];
  }
  double loss = log_loss(raw, y, class_count);
  model.train_loss.push_back(loss);

  const double newton_scale =
      class_count == 2 ? 1.0 : static_cast<double>(class_count - 1) / static_cast<double>(class_count);
  std::vector<double> g(n), h(n);
  Matrix proba(n, per_round == 1 ? 1 : class_count);

  for (std::size_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (class_count == 2) {
        proba(i, 0) = sigmoid(raw(i, 0));
      } else {
        softmax(raw.row(i), proba.row(i));
      }
    }
    std::vector<DecisionTree> trees;
    for (std::size_t k = 0; k < per_round; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double pk = proba(i, k);
        const double target = class_count == 2 ? (y[i] == 1 ? 1.0 : 0.0) : (static_cast<std::size_t>(y[i]) == k ? 1.0 : 0.0);
        g[i] = target - pk;
        h[i] = pk * (1.0 - pk);
      }
      DecisionTree tree =
          RegressionTreeBuilder(x, order, g, h, params.max_depth, params.min_samples_leaf, newton_scale).build();
      scale_leaves(tree, params.learning_rate);
      trees.push_back(std::move(tree));
    }

    // Backtrack: halve the whole round until the training loss does not rise.
    std::vector<std::vector<double>> step(per_round, std::vector<double>(n));
    for (std::size_t k = 0; k < per_round; ++k) {
      for (std::size_t i = 0; i < n; ++i) step[k][i] = trees[k].leaf_value(x.row(i))[0];
    }
    Matrix candidate = raw;
    double factor = 1.0;
    double candidate_loss = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      for (std::size_t k = 0; k < per_round; ++k) {
        for (std::size_t i = 0; i < n; ++i) candidate(i, k) = raw(i, k) + step[k][i] * factor;
      }
      candidate_loss = log_loss(candidate, y, class_count);
      if (candidate_loss <= loss) break;
      factor /= 2;
    }
    if (!(candidate_loss <= loss)) factor = 0.0;
    if (factor != 1.0) {
      for (auto& tree : trees) scale_leaves(tree, factor);
    }
    // Recompute from the stored leaves so training and prediction agree bit for bit.
    for (std::size_t k = 0; k < per_round; ++k) {
      for (std::size_t i = 0; i < n; ++i) raw(i, k) += trees[k].leaf_value(x.row(i))[0];
    }
    loss = log_loss(raw, y, class_count);
    model.train_loss.push_back(loss);
    for (auto& tree : trees) model.stages.push_back(std::move(tree));
    ++model.rounds;
  }
  return model;
}

}  // namespace v6covert::ml
