#include "latticomp/forest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "latticomp/metrics.hpp"
#include "latticomp/rng.hpp"

namespace latticomp {
namespace {

Eigen::MatrixXd random_features(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
  return x;
}

TEST(ForestFitTest, ConstantTargetsPredictConstant) {
  const auto x = random_features(40, 3, 1);
  const std::vector<double> y(40, 0.1);
  const auto forest = forest_fit(x, y, ForestSpec{});
  EXPECT_EQ(forest.trees.size(), 100u);
  for (double p : forest_predict(forest, random_features(25, 3, 2))) EXPECT_EQ(p, 0.1);
}

TEST(ForestFitTest, SingleUnboundedTreeMemorizesDistinctRows) {
  const auto x = random_features(60, 4, 3);
  Rng rng(4);
  std::vector<double> y(60);
  for (auto& v : y) v = rng.normal();
  ForestSpec spec;
  spec.tree_count = 1;
  spec.bootstrap = false;
  const auto forest = forest_fit(x, y, spec);
  const auto pred = forest_predict(forest, x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(pred[i], y[i]);
}

// XOR layout: no single split reduces variance, yet full depth still memorizes.
TEST(ForestFitTest, ZeroGainSplitsStillMemorize) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<double> y = {0, 0, 1, 1};
  ForestSpec spec;
  spec.tree_count = 1;
  spec.bootstrap = false;
  spec.feature_subsample = 1.0;
  const auto pred = forest_predict(forest_fit(x, y, spec), x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(pred[i], y[i]);
}

TEST(ForestFitTest, LinearTargetOutOfBagR2) {
  const auto x = random_features(200, 3, 5);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(static_cast<Eigen::Index>(i), 0);
  const auto forest = forest_fit(x, y, ForestSpec{});
  std::vector<double> actual;
  std::vector<double> oob;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(forest.oob_prediction[i])) continue;
    actual.push_back(y[i]);
    oob.push_back(forest.oob_prediction[i]);
  }
  EXPECT_GT(actual.size(), 190u);
  EXPECT_GE(r2(actual, oob), 0.8);
}

TEST(ForestFitTest, DeterministicUnderSeed) {
  const auto x = random_features(50, 4, 6);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(5 * x(static_cast<Eigen::Index>(i), 1));
  ForestSpec spec;
  spec.seed = 99;
  const auto q = random_features(30, 4, 7);
  EXPECT_EQ(forest_predict(forest_fit(x, y, spec), q), forest_predict(forest_fit(x, y, spec), q));
  spec.seed = 100;
  EXPECT_NE(forest_predict(forest_fit(x, y, ForestSpec{}), q), forest_predict(forest_fit(x, y, spec), q));
}

TEST(ForestFitTest, Errors) {
  EXPECT_THROW(forest_fit(Eigen::MatrixXd(0, 2), std::vector<double>{}, ForestSpec{}), std::invalid_argument);
  ForestSpec bad;
  bad.tree_count = 0;
  EXPECT_THROW(forest_fit(random_features(5, 2, 1), std::vector<double>(5, 1.0), bad), std::invalid_argument);
  Eigen::MatrixXd nan_x = random_features(3, 2, 1);
  nan_x(1, 1) = NAN;
  EXPECT_THROW(forest_fit(nan_x, std::vector<double>(3, 1.0), ForestSpec{}), std::invalid_argument);
}

TEST(ForestPredictTest, SingleTreeAndIdenticalTrees) {
  const auto x = random_features(30, 2, 8);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(static_cast<Eigen::Index>(i), 0) * 3.0;
  ForestSpec one;
  one.tree_count = 1;
  const auto single = forest_fit(x, y, one);
  const auto q = random_features(20, 2, 9);
  const auto pred = forest_predict(single, q);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const std::vector<double> row = {q(i, 0), q(i, 1)};
    EXPECT_EQ(pred[static_cast<std::size_t>(i)], single.trees[0].predict(row));
  }
  Forest copies = single;
  copies.trees.assign(7, single.trees[0]);
  EXPECT_EQ(forest_predict(copies, q), pred);
  EXPECT_THROW(forest_predict(single, random_features(2, 3, 1)), std::invalid_argument);
}

TEST(ForestPropertyTest, PredictionsWithinTargetRange) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_features(80, 5, seed);
    Rng rng(seed + 50);
    std::vector<double> y(80);
    for (auto& v : y) v = rng.normal(0.0, 10.0);
    ForestSpec spec;
    spec.seed = seed;
    spec.min_samples_leaf = 1 + seed;
    const auto forest = forest_fit(x, y, spec);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    for (double p : forest_predict(forest, random_features(100, 5, seed + 100) * 3.0 - Eigen::MatrixXd::Ones(100, 5))) {
      EXPECT_GE(p, *lo);
      EXPECT_LE(p, *hi);
    }
  }
}

TEST(ForestPropertyTest, MaxDepthLimitsTree) {
  const auto x = random_features(100, 2, 10);
  std::vector<double> y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(static_cast<Eigen::Index>(i), 0);
  ForestSpec spec;
  spec.tree_count = 1;
  spec.max_depth = 2;
  const auto forest = forest_fit(x, y, spec);
  EXPECT_LE(forest.trees[0].nodes().size(), 7u);
}

}  // namespace
}  // namespace latticomp
