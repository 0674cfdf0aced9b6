#include "latticomp/gp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace latticomp {

std::string_view to_string(ModeKind kind) noexcept {
  return kind == ModeKind::categorical ? "categorical" : "ordinal";
}

ModeKind parse_mode_kind(std::string_view text) {
  if (text == "categorical") return ModeKind::categorical;
  if (text == "ordinal") return ModeKind::ordinal;
  throw std::invalid_argument("unknown mode kind '" + std::string(text) + "' (expected categorical or ordinal)");
}

void GpKernelConfig::validate() const {
  if (!(constant_value > 0.0)) throw std::invalid_argument("GP constant_value must be positive");
  if (!(rbf_lengthscale > 0.0)) throw std::invalid_argument("GP rbf_lengthscale must be positive");
  if (!(white_noise >= 0.0)) throw std::invalid_argument("GP white_noise must be non-negative");
  if (!(alpha >= 0.0)) throw std::invalid_argument("GP alpha must be non-negative");
  if (optimize_hyperparams) {
    if (!(constant_min > 0.0 && constant_min <= constant_max) ||
        !(lengthscale_min > 0.0 && lengthscale_min <= lengthscale_max) ||
        !(noise_min > 0.0 && noise_min <= noise_max)) {
      throw std::invalid_argument("GP hyperparameter bounds must be positive and ordered");
    }
  }
}

std::vector<double> encode_cell(std::span<const std::size_t> index, const Shape& shape,
                                std::span<const ModeKind> kinds) {
  check_index(shape, index);
  if (kinds.size() != shape.order()) {
    throw std::invalid_argument("expected " + std::to_string(shape.order()) + " mode kinds, got " +
                                std::to_string(kinds.size()));
  }
  std::vector<double> features;
  for (std::size_t n = 0; n < shape.order(); ++n) {
    const std::size_t dim = shape.dim(n);
    if (kinds[n] == ModeKind::categorical) {
      for (std::size_t level = 0; level < dim; ++level) features.push_back(level == index[n] ? 1.0 : 0.0);
    } else {
      features.push_back(dim > 1 ? static_cast<double>(index[n]) / static_cast<double>(dim - 1) : 0.0);
    }
  }
  return features;
}

Eigen::MatrixXd encode_cells(std::span<const MultiIndex> cells, const Shape& shape, std::span<const ModeKind> kinds) {
  std::size_t width = 0;
  for (std::size_t n = 0; n < shape.order() && n < kinds.size(); ++n) {
    width += kinds[n] == ModeKind::categorical ? shape.dim(n) : 1;
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto row = encode_cell(cells[i], shape, kinds);
    for (std::size_t j = 0; j < row.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return out;
}

double kernel_eval(std::span<const double> x, std::span<const double> y, const GpKernelConfig& cfg,
                   bool same_training_point) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("kernel inputs differ in dimension: " + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
  const double ell = cfg.rbf_lengthscale;
  double k = cfg.constant_value * std::exp(-sq / (2.0 * ell * ell));
  if (same_training_point) k += cfg.white_noise;
  return k;
}

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  }
  return d;
}

Eigen::MatrixXd rbf(const Eigen::MatrixXd& sq_dist, const GpKernelConfig& cfg) {
  const double ell = cfg.rbf_lengthscale;
  return cfg.constant_value * (-sq_dist.array() / (2.0 * ell * ell)).exp().matrix();
}

Eigen::VectorXd centered(std::span<const double> targets, double& mean) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(targets.size()));
  mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) y(static_cast<Eigen::Index>(i)) = targets[i] - mean;
  return y;
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd gram;
  bool ok = false;
};

Factorization factorize(const Eigen::MatrixXd& sq_dist, const GpKernelConfig& cfg) {
  Factorization f;
  f.gram = rbf(sq_dist, cfg);
  f.gram.diagonal().array() += cfg.white_noise + cfg.alpha;
  f.llt.compute(f.gram);
  f.ok = f.llt.info() == Eigen::Success;
  return f;
}

double lml_from(const Factorization& f, const Eigen::VectorXd& y) {
  const Eigen::VectorXd a = f.llt.solve(y);
  const Eigen::MatrixXd L = f.llt.matrixL();
  const double log_det_half = L.diagonal().array().log().sum();
  return -0.5 * y.dot(a) - log_det_half - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

// Gradient with respect to (log constant, log lengthscale, log noise).
std::array<double, 3> lml_gradient(const Factorization& f, const Eigen::MatrixXd& sq_dist, const Eigen::VectorXd& y,
                                   const GpKernelConfig& cfg) {
  const Eigen::Index n = y.size();
  const Eigen::VectorXd a = f.llt.solve(y);
  const Eigen::MatrixXd inner = a * a.transpose() - f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd k_rbf = rbf(sq_dist, cfg);
  const double ell2 = cfg.rbf_lengthscale * cfg.rbf_lengthscale;
  const Eigen::MatrixXd d_ell = k_rbf.cwiseProduct(sq_dist / ell2);
  return {0.5 * inner.cwiseProduct(k_rbf).sum(), 0.5 * inner.cwiseProduct(d_ell).sum(),
          0.5 * cfg.white_noise * inner.trace()};
}

GpKernelConfig with_log_params(GpKernelConfig cfg, const std::array<double, 3>& theta) {
  cfg.constant_value = std::exp(theta[0]);
  cfg.rbf_lengthscale = std::exp(theta[1]);
  cfg.white_noise = std::exp(theta[2]);
  return cfg;
}

// Projected gradient ascent on the log marginal likelihood in log space,
// with Armijo backtracking, inside the configured bounds.
GpKernelConfig optimize_hyperparams(const Eigen::MatrixXd& sq_dist, const Eigen::VectorXd& y, GpKernelConfig cfg) {
  const std::array<double, 3> lo = {std::log(cfg.constant_min), std::log(cfg.lengthscale_min), std::log(cfg.noise_min)};
  const std::array<double, 3> hi = {std::log(cfg.constant_max), std::log(cfg.lengthscale_max), std::log(cfg.noise_max)};
  std::array<double, 3> theta = {std::log(cfg.constant_value), std::log(cfg.rbf_lengthscale),
                                 std::log(std::max(cfg.white_noise, cfg.noise_min))};
  for (std::size_t i = 0; i < 3; ++i) theta[i] = std::clamp(theta[i], lo[i], hi[i]);

  auto current = with_log_params(cfg, theta);
  auto fact = factorize(sq_dist, current);
  if (!fact.ok) return cfg;
  double value = lml_from(fact, y);
  double step = 1.0;
  for (int iter = 0; iter < 200 && step > 1e-10; ++iter) {
    const auto grad = lml_gradient(fact, sq_dist, y, current);
    bool accepted = false;
    while (step > 1e-10) {
      std::array<double, 3> trial{};
      double ascent = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        trial[i] = std::clamp(theta[i] + step * grad[i], lo[i], hi[i]);
        ascent += grad[i] * (trial[i] - theta[i]);
      }
      if (ascent <= 0.0) {
        step = 0.0;
        break;
      }
      const auto trial_cfg = with_log_params(cfg, trial);
      auto trial_fact = factorize(sq_dist, trial_cfg);
      if (trial_fact.ok) {
        const double trial_value = lml_from(trial_fact, y);
        if (trial_value >= value + 1e-4 * ascent) {
          const double gain = trial_value - value;
          theta = trial;
          current = trial_cfg;
          fact = std::move(trial_fact);
          value = trial_value;
          accepted = true;
          step = std::min(step * 2.0, 10.0);
          if (gain < 1e-10) step = 0.0;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return current;
}

}  // namespace

GpModel gp_fit(const Eigen::MatrixXd& features, std::span<const double> targets, const GpKernelConfig& cfg) {
  cfg.validate();
  if (features.rows() == 0) throw std::invalid_argument("GP needs at least one training point");
  if (static_cast<std::size_t>(features.rows()) != targets.size()) {
    throw std::invalid_argument("GP feature rows and targets differ in count");
  }
  GpModel model;
  model.features = features;
  model.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const Eigen::VectorXd y = centered(targets, model.target_mean);
  const Eigen::MatrixXd sq_dist = squared_distances(features, features);
  model.config = cfg.optimize_hyperparams ? optimize_hyperparams(sq_dist, y, cfg) : cfg;

  const auto fact = factorize(sq_dist, model.config);
  if (!fact.ok) {
    throw std::runtime_error("GP Gram matrix is not positive definite; increase alpha");
  }
  model.cholesky = fact.llt.matrixL();
  model.dual_weights = fact.llt.solve(y);
  return model;
}

GpPrediction gp_predict(const GpModel& model, const Eigen::MatrixXd& queries) {
  GpPrediction out;
  if (queries.rows() == 0) return out;
  if (queries.cols() != model.features.cols()) {
    throw std::invalid_argument("query width " + std::to_string(queries.cols()) + " does not match training width " +
                                std::to_string(model.features.cols()));
  }
  const Eigen::MatrixXd cross = rbf(squared_distances(queries, model.features), model.config);
  const Eigen::VectorXd mean = cross * model.dual_weights;
  const Eigen::MatrixXd v = model.cholesky.triangularView<Eigen::Lower>().solve(cross.transpose());
  out.mean.resize(static_cast<std::size_t>(queries.rows()));
  out.variance.resize(out.mean.size());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out.mean[static_cast<std::size_t>(i)] = mean(i) + model.target_mean;
    const double var = model.config.constant_value - v.col(i).squaredNorm();
    out.variance[static_cast<std::size_t>(i)] = std::max(var, 0.0);
  }
  return out;
}

double log_marginal_likelihood(const Eigen::MatrixXd& features, std::span<const double> targets,
                               const GpKernelConfig& cfg) {
  cfg.validate();
  if (features.rows() == 0 || static_cast<std::size_t>(features.rows()) != targets.size()) {
    throw std::invalid_argument("log_marginal_likelihood needs matching, nonempty features and targets");
  }
  double mean = 0.0;
  const Eigen::VectorXd y = centered(targets, mean);
  const auto fact = factorize(squared_distances(features, features), cfg);
  if (!fact.ok) return -std::numeric_limits<double>::infinity();
  return lml_from(fact, y);
}

}  // namespace latticomp
