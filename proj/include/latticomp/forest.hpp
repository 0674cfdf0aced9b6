#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace latticomp {

struct ForestSpec {
  std::size_t tree_count = 100;
  /// Unlimited when empty.
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;
  /// Fraction of features drawn as split candidates at each node.
  double feature_subsample = 1.0 / 3.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  /// -1 marks a leaf.
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  /// Mean target of the training samples that reached this node.
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

/// CART regression tree; samples with x[feature] <= threshold go left.
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> row) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

struct Forest {
  std::vector<RegressionTree> trees;
  std::size_t feature_count = 0;
  /// Mean prediction of the trees for which each training sample was out of
  /// bag; NaN where a sample was in every bag (or bootstrap is off).
  std::vector<double> oob_prediction;
};

/// Rows of `features` are samples. Deterministic given `spec.seed`.
Forest forest_fit(const Eigen::MatrixXd& features, std::span<const double> targets, const ForestSpec& spec);

std::vector<double> forest_predict(const Forest& forest, const Eigen::MatrixXd& features);

}  // namespace latticomp
