#include "latticomp/neural.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "latticomp/rng.hpp"
#include "test_support.hpp"

namespace latticomp {
namespace {

TEST(NeuralLayoutTest, WidthsAndDecayMask) {
  const NeuralTcModel model(Shape{3, 4, 2}, 2, {4, 3});
  EXPECT_EQ(model.input_width(), 6u);
  EXPECT_EQ(model.layer_count(), 3u);
  EXPECT_EQ(model.layer_out(2), 1u);
  // 18 embeddings + (6*4+4) + (4*3+3) + (3*1+1)
  EXPECT_EQ(model.parameters().size(), 18u + 28u + 15u + 4u);
  const auto mask = model.decay_mask();
  std::size_t biases = 0;
  for (auto m : mask) biases += (m == 0);
  EXPECT_EQ(biases, 4u + 3u + 1u);
  EXPECT_EQ(mask[model.bias_offset(1)], 0);
  EXPECT_EQ(mask[model.weight_offset(1)], 1);
}

TEST(NeuralPredictTest, ZeroNetworkOutputsZero) {
  const NeuralTcModel model(Shape{3, 4}, 2, {5});
  for (const auto& idx : all_cells(model.shape())) EXPECT_EQ(neural_predict(model, idx), 0.0);
}

TEST(NeuralPredictTest, ZeroOutputLayerOutputsZeroForDeepNetwork) {
  auto model = NeuralTcModel::random(Shape{3, 4, 2}, 3, {8, 6, 4}, 7);
  const std::size_t last = model.layer_count() - 1;
  for (std::size_t i = 0; i < model.layer_in(last); ++i) model.parameters()[model.weight_offset(last) + i] = 0.0;
  model.parameters()[model.bias_offset(last)] = 0.0;
  for (const auto& idx : all_cells(model.shape())) EXPECT_EQ(neural_predict(model, idx), 0.0);
}

// 2 modes, rank 1, one hidden unit: h = relu(e0 + e1), out = h. With
// positive embeddings the output is their sum.
TEST(NeuralPredictTest, HandComputedSumNetwork) {
  NeuralTcModel model(Shape{2, 3}, 1, {1});
  model.embedding(0, 0, 0) = 0.5;
  model.embedding(0, 1, 0) = 1.25;
  model.embedding(1, 0, 0) = 2.0;
  model.embedding(1, 1, 0) = 0.75;
  model.embedding(1, 2, 0) = 3.0;
  auto p = model.parameters();
  p[model.weight_offset(0)] = 1.0;
  p[model.weight_offset(0) + 1] = 1.0;
  p[model.weight_offset(1)] = 1.0;
  EXPECT_DOUBLE_EQ(neural_predict(model, MultiIndex{1, 2}), 4.25);
  EXPECT_DOUBLE_EQ(neural_predict(model, MultiIndex{0, 1}), 1.25);
}

TEST(NeuralPredictTest, DeterministicAndBoundsChecked) {
  const auto model = NeuralTcModel::random(Shape{3, 4}, 2, {4}, 3);
  EXPECT_EQ(neural_predict(model, MultiIndex{2, 1}), neural_predict(model, MultiIndex{2, 1}));
  EXPECT_THROW(neural_predict(model, MultiIndex{3, 0}), std::out_of_range);
}

TEST(NeuralGradientTest, ZeroLossGradsGiveZero) {
  const auto model = NeuralTcModel::random(Shape{3, 4}, 2, {4}, 3);
  const auto obs = ObservationSet::from_dense(DenseTensor(Shape{3, 4}));
  for (double g : neural_gradient(model, obs, std::vector<double>(obs.size(), 0.0))) EXPECT_EQ(g, 0.0);
}

TEST(NeuralGradientTest, LinearNetworkEmbeddingGradientIsWeight) {
  auto model = NeuralTcModel::random(Shape{2, 3}, 2, {}, 9);
  const ObservationSet obs(Shape{2, 3}, {{{1, 2}, 0.0}});
  const double lg = 0.7;
  const auto g = neural_gradient(model, obs, std::vector<double>{lg});
  const auto p = model.parameters();
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t row = n == 0 ? 1 : 2;
      const double w = p[model.weight_offset(0) + n * 2 + k];
      EXPECT_DOUBLE_EQ(g[model.embedding_offset(n) + row * 2 + k], lg * w);
    }
  }
  EXPECT_DOUBLE_EQ(g[model.bias_offset(0)], lg);
}

TEST(NeuralGradientTest, MisalignedLengthsThrow) {
  const NeuralTcModel model(Shape{2, 2}, 1, {2});
  const ObservationSet obs(Shape{2, 2}, {{{0, 0}, 1.0}});
  EXPECT_THROW(neural_gradient(model, obs, std::vector<double>{}), std::invalid_argument);
}

// Smallest |pre-activation| over all hidden units at the observed cells.
double min_kink_distance(const NeuralTcModel& model, const ObservationSet& obs) {
  double closest = INFINITY;
  const auto p = model.parameters();
  for (const auto& e : obs.entries()) {
    std::vector<double> a;
    for (std::size_t n = 0; n < model.shape().order(); ++n)
      for (std::size_t k = 0; k < model.rank(); ++k) a.push_back(model.embedding(n, e.index[n], k));
    for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
      std::vector<double> next(model.layer_out(l));
      for (std::size_t o = 0; o < next.size(); ++o) {
        double z = p[model.bias_offset(l) + o];
        for (std::size_t i = 0; i < a.size(); ++i) z += p[model.weight_offset(l) + o * a.size() + i] * a[i];
        closest = std::min(closest, std::abs(z));
        next[o] = std::max(z, 0.0);
      }
      a = next;
    }
  }
  return closest;
}

TEST(NeuralGradientTest, MatchesFiniteDifferencesAwayFromKinks) {
  Rng rng(4242);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 10 && seed < 100; ++seed) {
    const Shape shape{3, 4, 2};
    const auto model = NeuralTcModel::random(shape, 2, {4}, seed);
    std::vector<Observation> entries;
    for (const auto& idx : all_cells(shape)) {
      if (rng.uniform() < 0.5) entries.push_back({idx, rng.normal()});
    }
    const ObservationSet obs(shape, entries);
    if (min_kink_distance(model, obs) < 1e-4) continue;
    std::vector<double> lg;
    for (std::size_t i = 0; i < obs.size(); ++i) lg.push_back(rng.normal());
    const auto loss = [&](std::span<const double> p) {
      const NeuralTcModel m(shape, 2, {4}, std::vector<double>(p.begin(), p.end()));
      double sum = 0.0;
      for (std::size_t i = 0; i < obs.size(); ++i) sum += lg[i] * neural_predict(m, obs[i].index);
      return sum;
    };
    const auto analytic = neural_gradient(model, obs, lg);
    const std::vector<double> params(model.parameters().begin(), model.parameters().end());
    EXPECT_LT(testing::relative_error(analytic, testing::finite_difference(params, loss)), 1e-4) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

}  // namespace
}  // namespace latticomp
