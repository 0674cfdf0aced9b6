#include "latticomp/cpd.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "latticomp/rng.hpp"
#include "test_support.hpp"

namespace latticomp {
namespace {

TEST(CpdPredictTest, RankOneOuterProduct) {
  const auto model = CpdModel::from_factors(Shape{2, 2}, 1, {{2, 3}, {1, 4}});
  EXPECT_DOUBLE_EQ(cpd_predict(model, MultiIndex{1, 1}), 12.0);
  EXPECT_DOUBLE_EQ(cpd_predict(model, MultiIndex{0, 1}), 8.0);
}

TEST(CpdPredictTest, ZeroFactorsPredictZero) {
  const CpdModel model(Shape{3, 4, 2}, 3);
  for (const auto& idx : all_cells(model.shape())) EXPECT_EQ(cpd_predict(model, idx), 0.0);
}

TEST(CpdPredictTest, ZeroSecondComponentMatchesRankOne) {
  const auto r1 = CpdModel::from_factors(Shape{2, 3}, 1, {{1.5, -2}, {0.5, 1, 3}});
  // Row-major (dim x 2): column 0 matches r1, column 1 zero.
  const auto r2 = CpdModel::from_factors(Shape{2, 3}, 2, {{1.5, 0, -2, 0}, {0.5, 0, 1, 0, 3, 0}});
  for (const auto& idx : all_cells(r1.shape())) EXPECT_DOUBLE_EQ(cpd_predict(r2, idx), cpd_predict(r1, idx));
}

TEST(CpdPredictTest, OutOfBoundsThrows) {
  const CpdModel model(Shape{2, 3}, 1);
  EXPECT_THROW(cpd_predict(model, MultiIndex{2, 0}), std::out_of_range);
}

TEST(CpdReconstructTest, OnesOuterProduct) {
  const auto model = CpdModel::from_factors(Shape{2, 2}, 1, {{1, 1}, {1, 1}});
  const auto t = cpd_reconstruct(model);
  for (double v : t.values()) EXPECT_EQ(v, 1.0);
}

TEST(CpdReconstructTest, ExactRankOneTensor) {
  const std::vector<double> a = {1.0, -2.0, 0.5};
  const std::vector<double> b = {3.0, 0.25};
  const std::vector<double> c = {2.0, 1.0, -1.0, 4.0};
  const auto model = CpdModel::from_factors(Shape{3, 2, 4}, 1, {a, b, c});
  const auto t = cpd_reconstruct(model);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(t.at(MultiIndex{i, j, k}), a[i] * b[j] * c[k]);
}

TEST(CpdReconstructTest, MatchesCellByCellLoop) {
  const auto model = CpdModel::random(Shape{2, 3}, 3, 11);
  const auto t = cpd_reconstruct(model);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double expected = 0.0;
      for (std::size_t r = 0; r < 3; ++r) expected += model.factor(0, i, r) * model.factor(1, j, r);
      EXPECT_NEAR(t.at(MultiIndex{i, j}), expected, 1e-15);
    }
  }
}

TEST(CpdGradientTest, SingleObservationProductRule) {
  const auto model = CpdModel::from_factors(Shape{1, 1}, 1, {{2}, {3}});
  const ObservationSet obs(Shape{1, 1}, {{{0, 0}, 0.0}});
  const std::vector<double> lg = {1.0};
  const auto g = cpd_gradient(model, obs, lg);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], 2.0);
}

TEST(CpdGradientTest, ZeroLossGradsGiveZero) {
  const auto model = CpdModel::random(Shape{3, 4, 2}, 2, 5);
  const auto obs = ObservationSet::from_dense(DenseTensor(Shape{3, 4, 2}));
  const std::vector<double> lg(obs.size(), 0.0);
  for (double g : cpd_gradient(model, obs, lg)) EXPECT_EQ(g, 0.0);
}

TEST(CpdGradientTest, MisalignedLengthsThrow) {
  const CpdModel model(Shape{2, 2}, 1);
  const ObservationSet obs(Shape{2, 2}, {{{0, 0}, 1.0}});
  EXPECT_THROW(cpd_gradient(model, obs, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

// Smoothed MAE: mean sqrt(r^2 + d^2). Its per-entry derivative feeds the
// analytic gradient; the finite-difference side only evaluates predictions.
TEST(CpdGradientTest, MatchesFiniteDifferencesOfSmoothedMae) {
  constexpr double kSmoothing = 0.1;
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape shape{2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(3)};
    const std::size_t rank = 1 + rng.below(4);
    const auto model = CpdModel::random(shape, rank, 1000 + trial);
    std::vector<Observation> entries;
    for (const auto& idx : all_cells(shape)) {
      if (rng.uniform() < 0.6) entries.push_back({idx, rng.normal()});
    }
    if (entries.empty()) entries.push_back({all_cells(shape).front(), 1.0});
    const ObservationSet obs(shape, entries);

    const auto loss = [&](std::span<const double> p) {
      const CpdModel m(shape, rank, std::vector<double>(p.begin(), p.end()));
      double sum = 0.0;
      for (const auto& e : obs.entries()) {
        const double r = cpd_predict(m, e.index) - e.value;
        sum += std::sqrt(r * r + kSmoothing * kSmoothing);
      }
      return sum / static_cast<double>(obs.size());
    };
    std::vector<double> lg;
    for (const auto& e : obs.entries()) {
      const double r = cpd_predict(model, e.index) - e.value;
      lg.push_back(r / std::sqrt(r * r + kSmoothing * kSmoothing) / static_cast<double>(obs.size()));
    }
    const auto analytic = cpd_gradient(model, obs, lg);
    const std::vector<double> params(model.parameters().begin(), model.parameters().end());
    const auto numeric = testing::finite_difference(params, loss);
    EXPECT_LT(testing::relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(CpdPropertyTest, ColumnScalingIsMultilinear) {
  auto model = CpdModel::random(Shape{3, 4, 2}, 3, 17);
  const auto before = model;
  const double c = -2.5;
  const std::size_t r_scaled = 1;
  for (std::size_t i = 0; i < 4; ++i) model.factor(1, i, r_scaled) *= c;
  for (const auto& idx : all_cells(model.shape())) {
    double expected = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
      double prod = 1.0;
      for (std::size_t n = 0; n < 3; ++n) prod *= before.factor(n, idx[n], r);
      expected += (r == r_scaled ? c : 1.0) * prod;
    }
    EXPECT_NEAR(cpd_predict(model, idx), expected, 1e-12);
  }
}

TEST(CpdPropertyTest, ComponentPermutationInvariance) {
  const auto model = CpdModel::random(Shape{3, 4, 2}, 4, 23);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  CpdModel permuted(model.shape(), 4);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < model.shape().dim(n); ++i)
      for (std::size_t r = 0; r < 4; ++r) permuted.factor(n, i, r) = model.factor(n, i, perm[r]);
  for (const auto& idx : all_cells(model.shape())) {
    EXPECT_NEAR(cpd_predict(permuted, idx), cpd_predict(model, idx), 1e-14);
  }
}

TEST(SmoothnessPenaltyTest, ConstantColumnsHaveZeroPenalty) {
  const auto model = CpdModel::from_factors(Shape{2, 3}, 2, {{1, 2, 1, 2}, {4, -1, 4, -1, 4, -1}});
  const auto p = smoothness_penalty(model, {{0, 1}, 1.0});
  EXPECT_EQ(p.value, 0.0);
  for (double g : p.gradient) EXPECT_EQ(g, 0.0);
}

TEST(SmoothnessPenaltyTest, SingleSquaredDifference) {
  const auto model = CpdModel::from_factors(Shape{2, 1}, 1, {{0, 1}, {5}});
  const auto p = smoothness_penalty(model, {{0}, 1.0});
  EXPECT_DOUBLE_EQ(p.value, 1.0);
  EXPECT_DOUBLE_EQ(p.gradient[0], -2.0);
  EXPECT_DOUBLE_EQ(p.gradient[1], 2.0);
  EXPECT_EQ(p.gradient[2], 0.0);
}

TEST(SmoothnessPenaltyTest, ZeroWeightDisables) {
  const auto model = CpdModel::random(Shape{4, 5}, 2, 3);
  const auto p = smoothness_penalty(model, {{0, 1}, 0.0});
  EXPECT_EQ(p.value, 0.0);
  for (double g : p.gradient) EXPECT_EQ(g, 0.0);
}

TEST(SmoothnessPenaltyTest, SizeOneModeContributesNothing) {
  const auto model = CpdModel::random(Shape{1, 5}, 2, 3);
  EXPECT_EQ(smoothness_penalty(model, {{0}, 1.0}).value, 0.0);
}

TEST(SmoothnessPenaltyTest, InvalidSpecRejected) {
  const CpdModel model(Shape{2, 3}, 1);
  EXPECT_THROW(smoothness_penalty(model, {{2}, 1.0}), std::invalid_argument);
  EXPECT_THROW(smoothness_penalty(model, {{0}, -1.0}), std::invalid_argument);
  EXPECT_THROW(smoothness_penalty(model, {{1, 1}, 1.0}), std::invalid_argument);
}

TEST(SmoothnessPenaltyTest, GradientMatchesFiniteDifferencesAndIsNonNegative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Shape shape{4, 5, 3};
    const auto model = CpdModel::random(shape, 3, seed);
    const SmoothnessSpec spec{{1, 2}, 0.3};
    const auto p = smoothness_penalty(model, spec);
    EXPECT_GT(p.value, 0.0);
    const auto loss = [&](std::span<const double> params) {
      return smoothness_penalty(CpdModel(shape, 3, std::vector<double>(params.begin(), params.end())), spec).value;
    };
    const std::vector<double> params(model.parameters().begin(), model.parameters().end());
    EXPECT_LT(testing::relative_error(p.gradient, testing::finite_difference(params, loss)), 1e-6);
  }
}

}  // namespace
}  // namespace latticomp
