#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latticomp/tensor.hpp"

namespace latticomp {

/// Rank-R CP decomposition: one (dim_n x R) factor matrix per mode.
///
/// All factor matrices live in a single flat parameter vector so that the
/// optimizer can treat the model as one array. Mode n occupies
/// [mode_offset(n), mode_offset(n) + dim_n * R), row-major within the mode.
class CpdModel {
 public:
  CpdModel() = default;
  /// Zero factors.
  CpdModel(Shape shape, std::size_t rank);
  CpdModel(Shape shape, std::size_t rank, std::vector<double> parameters);

  /// Entries uniform on [-0.5, 0.5] scaled by 1/sqrt(rank).
  static CpdModel random(Shape shape, std::size_t rank, std::uint64_t seed);

  /// `factors[n]` is the row-major (dim_n x rank) matrix of mode n.
  static CpdModel from_factors(Shape shape, std::size_t rank, const std::vector<std::vector<double>>& factors);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return rank_; }

  std::size_t mode_offset(std::size_t mode) const { return offsets_.at(mode); }
  double factor(std::size_t mode, std::size_t row, std::size_t r) const {
    return params_[offsets_[mode] + row * rank_ + r];
  }
  double& factor(std::size_t mode, std::size_t row, std::size_t r) { return params_[offsets_[mode] + row * rank_ + r]; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

 private:
  void init_layout();

  Shape shape_;
  std::size_t rank_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Sum over components of the product of the indexed factor rows.
double cpd_predict(const CpdModel& model, std::span<const std::size_t> index);

DenseTensor cpd_reconstruct(const CpdModel& model);

/// Gradient of sum_i loss_grads[i] * prediction(obs[i]) with respect to
/// every factor entry, laid out like CpdModel::parameters().
std::vector<double> cpd_gradient(const CpdModel& model, const ObservationSet& obs,
                                 std::span<const double> loss_grads);

/// Squared first-order row differences on the listed factor matrices.
struct SmoothnessSpec {
  std::vector<std::size_t> smooth_modes;
  double weight = 0.1;

  void validate(const Shape& shape) const;
};

struct PenaltyResult {
  double value = 0.0;
  std::vector<double> gradient;
};

PenaltyResult smoothness_penalty(const CpdModel& model, const SmoothnessSpec& spec);

}  // namespace latticomp
