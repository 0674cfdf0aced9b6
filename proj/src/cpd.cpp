#include "latticomp/cpd.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "latticomp/rng.hpp"

namespace latticomp {

CpdModel::CpdModel(Shape shape, std::size_t rank) : shape_(std::move(shape)), rank_(rank) {
  if (rank_ == 0) throw std::invalid_argument("CPD rank must be at least 1");
  init_layout();
  params_.assign(offsets_.back(), 0.0);
  offsets_.pop_back();
}

CpdModel::CpdModel(Shape shape, std::size_t rank, std::vector<double> parameters) : CpdModel(std::move(shape), rank) {
  if (parameters.size() != params_.size()) {
    throw std::invalid_argument("CPD model expects " + std::to_string(params_.size()) + " parameters, got " +
                                std::to_string(parameters.size()));
  }
  for (double p : parameters) {
    if (!std::isfinite(p)) throw std::invalid_argument("non-finite CPD factor entry");
  }
  params_ = std::move(parameters);
}

void CpdModel::init_layout() {
  offsets_.clear();
  std::size_t offset = 0;
  for (std::size_t n = 0; n < shape_.order(); ++n) {
    offsets_.push_back(offset);
    offset += shape_.dim(n) * rank_;
  }
  // Trailing total; popped by the constructor.
  offsets_.push_back(offset);
}

CpdModel CpdModel::random(Shape shape, std::size_t rank, std::uint64_t seed) {
  CpdModel model(std::move(shape), rank);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rank));
  for (double& p : model.params_) p = rng.uniform(-0.5, 0.5) * scale;
  return model;
}

CpdModel CpdModel::from_factors(Shape shape, std::size_t rank, const std::vector<std::vector<double>>& factors) {
  if (factors.size() != shape.order()) {
    throw std::invalid_argument("expected one factor matrix per mode");
  }
  std::vector<double> params;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (factors[n].size() != shape.dim(n) * rank) {
      throw std::invalid_argument("factor matrix for mode " + std::to_string(n) + " must have " +
                                  std::to_string(shape.dim(n) * rank) + " entries");
    }
    params.insert(params.end(), factors[n].begin(), factors[n].end());
  }
  return CpdModel(std::move(shape), rank, std::move(params));
}

double cpd_predict(const CpdModel& model, std::span<const std::size_t> index) {
  check_index(model.shape(), index);
  double sum = 0.0;
  for (std::size_t r = 0; r < model.rank(); ++r) {
    double prod = 1.0;
    for (std::size_t n = 0; n < index.size(); ++n) prod *= model.factor(n, index[n], r);
    sum += prod;
  }
  return sum;
}

DenseTensor cpd_reconstruct(const CpdModel& model) {
  const Shape& shape = model.shape();
  std::vector<double> values(shape.cell_count());
  for (std::size_t offset = 0; offset < values.size(); ++offset) {
    values[offset] = cpd_predict(model, delinearize(shape, offset));
  }
  return DenseTensor(shape, std::move(values));
}

std::vector<double> cpd_gradient(const CpdModel& model, const ObservationSet& obs,
                                 std::span<const double> loss_grads) {
  if (loss_grads.size() != obs.size()) {
    throw std::invalid_argument("loss gradient count " + std::to_string(loss_grads.size()) +
                                " does not match observation count " + std::to_string(obs.size()));
  }
  if (!(obs.shape() == model.shape())) throw std::invalid_argument("observation shape differs from model shape");

  const std::size_t order = model.shape().order();
  std::vector<double> grad(model.parameters().size(), 0.0);
  // prefix[n] = product of modes < n, suffix[n] = product of modes > n.
  std::vector<double> prefix(order + 1);
  std::vector<double> suffix(order + 1);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double g = loss_grads[i];
    if (g == 0.0) continue;
    const auto& idx = obs[i].index;
    for (std::size_t r = 0; r < model.rank(); ++r) {
      prefix[0] = 1.0;
      for (std::size_t n = 0; n < order; ++n) prefix[n + 1] = prefix[n] * model.factor(n, idx[n], r);
      suffix[order] = 1.0;
      for (std::size_t n = order; n > 0; --n) suffix[n - 1] = suffix[n] * model.factor(n - 1, idx[n - 1], r);
      for (std::size_t n = 0; n < order; ++n) {
        grad[model.mode_offset(n) + idx[n] * model.rank() + r] += g * prefix[n] * suffix[n + 1];
      }
    }
  }
  return grad;
}

void SmoothnessSpec::validate(const Shape& shape) const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("smoothness weight must be finite and non-negative");
  }
  std::vector<bool> seen(shape.order(), false);
  for (std::size_t mode : smooth_modes) {
    if (mode >= shape.order()) {
      throw std::invalid_argument("smooth mode " + std::to_string(mode) + " out of range for " +
                                  std::to_string(shape.order()) + "-mode shape");
    }
    if (seen[mode]) throw std::invalid_argument("smooth mode " + std::to_string(mode) + " listed twice");
    seen[mode] = true;
  }
}

PenaltyResult smoothness_penalty(const CpdModel& model, const SmoothnessSpec& spec) {
  spec.validate(model.shape());
  PenaltyResult result;
  result.gradient.assign(model.parameters().size(), 0.0);
  if (spec.weight == 0.0) return result;

  for (std::size_t mode : spec.smooth_modes) {
    const std::size_t rows = model.shape().dim(mode);
    for (std::size_t i = 0; i + 1 < rows; ++i) {
      for (std::size_t r = 0; r < model.rank(); ++r) {
        const double diff = model.factor(mode, i + 1, r) - model.factor(mode, i, r);
        result.value += spec.weight * diff * diff;
        const double d = 2.0 * spec.weight * diff;
        result.gradient[model.mode_offset(mode) + (i + 1) * model.rank() + r] += d;
        result.gradient[model.mode_offset(mode) + i * model.rank() + r] -= d;
      }
    }
  }
  return result;
}

}  // namespace latticomp
