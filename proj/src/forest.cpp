#include "latticomp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "latticomp/rng.hpp"

namespace latticomp {

void ForestSpec::validate() const {
  if (tree_count == 0) throw std::invalid_argument("forest needs at least one tree");
  if (min_samples_leaf == 0) throw std::invalid_argument("min_samples_leaf must be at least 1");
  if (!(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
    throw std::invalid_argument("feature_subsample must be in (0, 1]");
  }
  if (max_depth && *max_depth == 0) throw std::invalid_argument("max_depth must be at least 1 when set");
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("regression tree needs at least one node");
  const auto count = static_cast<std::int32_t>(nodes_.size());
  for (const auto& node : nodes_) {
    if (!std::isfinite(node.value)) throw std::invalid_argument("non-finite tree node value");
    if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || node.left >= count || node.right >= count)) {
      throw std::invalid_argument("tree node has invalid children");
    }
  }
}

double RegressionTree::predict(std::span<const double> row) const {
  std::size_t at = 0;
  while (!nodes_[at].is_leaf()) {
    const auto& node = nodes_[at];
    at = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                  : node.right);
  }
  return nodes_[at].value;
}

namespace {

struct Split {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

bool better(double score, std::int32_t feature, double threshold, const Split& best) {
  if (score != best.score) return score > best.score;
  if (feature != best.feature) return feature < best.feature;
  return threshold < best.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> y, const ForestSpec& spec, Rng& rng)
      : x_(x), y_(y), spec_(spec), rng_(rng) {
    const auto p = static_cast<std::size_t>(x.cols());
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(spec.feature_subsample * static_cast<double>(p))));
    order_.resize(p);
  }

  std::vector<TreeNode> build(std::vector<std::size_t> samples) {
    nodes_.clear();
    grow(samples, 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t>& samples, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    double sum = 0.0;
    double lo = y_[samples[0]];
    double hi = lo;
    for (std::size_t s : samples) {
      sum += y_[s];
      lo = std::min(lo, y_[s]);
      hi = std::max(hi, y_[s]);
    }
    nodes_[static_cast<std::size_t>(id)].value = std::clamp(sum / static_cast<double>(samples.size()), lo, hi);

    const bool pure = std::all_of(samples.begin(), samples.end(), [&](std::size_t s) { return y_[s] == y_[samples[0]]; });
    if (pure || samples.size() < 2 * spec_.min_samples_leaf || (spec_.max_depth && depth >= *spec_.max_depth)) {
      return id;
    }
    const Split split = find_split(samples);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t s : samples) {
      (x_(static_cast<Eigen::Index>(s), split.feature) <= split.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const std::int32_t l = grow(left, depth + 1);
    const std::int32_t r = grow(right, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Draws features in random order until `mtry_` non-constant ones have been
  // evaluated; the best variance-reduction split among them wins.
  Split find_split(const std::vector<std::size_t>& samples) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(std::span<std::size_t>(order_));
    Split best;
    std::size_t evaluated = 0;
    std::vector<std::pair<double, std::size_t>> column(samples.size());
    const std::size_t n = samples.size();
    const std::size_t min_leaf = spec_.min_samples_leaf;

    for (std::size_t f : order_) {
      if (evaluated >= mtry_) break;
      const auto fi = static_cast<Eigen::Index>(f);
      for (std::size_t i = 0; i < n; ++i) column[i] = {x_(static_cast<Eigen::Index>(samples[i]), fi), samples[i]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++evaluated;

      double total = 0.0;
      for (const auto& c : column) total += y_[c.second];
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += y_[column[i].second];
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (column[i].first == column[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(nl) + right_sum * right_sum / static_cast<double>(nr);
        double threshold = 0.5 * (column[i].first + column[i + 1].first);
        if (!(threshold < column[i + 1].first)) threshold = column[i].first;
        if (better(score, static_cast<std::int32_t>(f), threshold, best)) {
          best = {static_cast<std::int32_t>(f), threshold, score};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const double> y_;
  const ForestSpec& spec_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> order_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

Forest forest_fit(const Eigen::MatrixXd& features, std::span<const double> targets, const ForestSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0) throw std::invalid_argument("cannot fit a forest on empty data");
  if (targets.size() != n) throw std::invalid_argument("forest feature rows and targets differ in count");
  if (features.cols() == 0) throw std::invalid_argument("forest needs at least one feature");
  if (!features.allFinite()) throw std::invalid_argument("forest features must be finite");
  for (double t : targets) {
    if (!std::isfinite(t)) throw std::invalid_argument("forest targets must be finite");
  }

  Forest forest;
  forest.feature_count = static_cast<std::size_t>(features.cols());
  std::vector<double> oob_sum(n, 0.0);
  std::vector<std::size_t> oob_count(n, 0);
  std::vector<double> row(forest.feature_count);

  for (std::size_t t = 0; t < spec.tree_count; ++t) {
    Rng rng(derive_seed(spec.seed, t));
    std::vector<std::size_t> samples(n);
    std::vector<unsigned char> in_bag(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      samples[i] = spec.bootstrap ? static_cast<std::size_t>(rng.below(n)) : i;
      in_bag[samples[i]] = 1;
    }
    TreeBuilder builder(features, targets, spec, rng);
    RegressionTree tree(builder.build(std::move(samples)));
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      oob_sum[i] += tree.predict(row);
      oob_count[i] += 1;
    }
    forest.trees.push_back(std::move(tree));
  }

  forest.oob_prediction.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    forest.oob_prediction[i] =
        oob_count[i] ? oob_sum[i] / static_cast<double>(oob_count[i]) : std::numeric_limits<double>::quiet_NaN();
  }
  return forest;
}

std::vector<double> forest_predict(const Forest& forest, const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.cols()) != forest.feature_count) {
    throw std::invalid_argument("feature width " + std::to_string(features.cols()) + " does not match forest width " +
                                std::to_string(forest.feature_count));
  }
  if (forest.trees.empty()) throw std::invalid_argument("forest has no trees");
  std::vector<double> out(static_cast<std::size_t>(features.rows()), 0.0);
  std::vector<double> row(forest.feature_count);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = features(i, static_cast<Eigen::Index>(j));
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& tree : forest.trees) {
      const double v = tree.predict(row);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // Clamped so a mean of equal leaves is exactly that leaf value.
    out[static_cast<std::size_t>(i)] = std::clamp(sum / static_cast<double>(forest.trees.size()), lo, hi);
  }
  return out;
}

}  // namespace latticomp
