#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "latticomp/modes.hpp"
#include "latticomp/tensor.hpp"

namespace latticomp {

/// constant * RBF(lengthscale) + white(noise), plus `alpha` jitter on the
/// training diagonal. Bounds are used only when optimizing hyperparameters.
struct GpKernelConfig {
  double constant_value = 1.0;
  double rbf_lengthscale = 1.0;
  double white_noise = 1e-3;
  double alpha = 0.01;
  bool optimize_hyperparams = false;

  double constant_min = 1e-3;
  double constant_max = 1e3;
  double lengthscale_min = 1e-2;
  double lengthscale_max = 1e2;
  double noise_min = 1e-5;
  double noise_max = 1e1;

  void validate() const;
};

/// One-hot for categorical modes, min-max scaled level in [0, 1] for ordinal
/// modes, concatenated in mode order.
std::vector<double> encode_cell(std::span<const std::size_t> index, const Shape& shape,
                                std::span<const ModeKind> kinds);

/// Row i encodes cells[i].
Eigen::MatrixXd encode_cells(std::span<const MultiIndex> cells, const Shape& shape, std::span<const ModeKind> kinds);

/// The white term is added only when x and y are the same training point.
double kernel_eval(std::span<const double> x, std::span<const double> y, const GpKernelConfig& cfg,
                   bool same_training_point = false);

struct GpModel {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  double target_mean = 0.0;
  /// Lower Cholesky factor of K + alpha * I.
  Eigen::MatrixXd cholesky;
  Eigen::VectorXd dual_weights;
  /// Hyperparameters actually used, after optional optimization.
  GpKernelConfig config;
};

/// Fits on mean-centered targets. Throws std::runtime_error if the Gram
/// matrix is not positive definite.
GpModel gp_fit(const Eigen::MatrixXd& features, std::span<const double> targets, const GpKernelConfig& cfg);

struct GpPrediction {
  std::vector<double> mean;
  std::vector<double> variance;
};

GpPrediction gp_predict(const GpModel& model, const Eigen::MatrixXd& queries);

/// Log marginal likelihood of the mean-centered targets.
double log_marginal_likelihood(const Eigen::MatrixXd& features, std::span<const double> targets,
                               const GpKernelConfig& cfg);

}  // namespace latticomp
