#include "latticomp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "latticomp/format.hpp"

namespace latticomp {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (epochs == 0) throw std::invalid_argument("epochs must be at least 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw std::invalid_argument("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw std::invalid_argument("adam_beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("adam_epsilon must be positive");
  if (early_stopping && plateau_window == 0) throw std::invalid_argument("plateau_window must be at least 1");
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty()) throw std::invalid_argument("mae of empty lists");
  if (actual.size() != predicted.size()) {
    throw std::invalid_argument("mae length mismatch: " + std::to_string(actual.size()) + " vs " +
                                std::to_string(predicted.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
  return sum / static_cast<double>(actual.size());
}

std::vector<double> mae_subgradient(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw std::invalid_argument("mae_subgradient length mismatch: " + std::to_string(actual.size()) + " vs " +
                                std::to_string(predicted.size()));
  }
  std::vector<double> out(actual.size(), 0.0);
  const double inv_n = actual.empty() ? 0.0 : 1.0 / static_cast<double>(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double residual = predicted[i] - actual[i];
    if (residual > 0.0) {
      out[i] = inv_n;
    } else if (residual < 0.0) {
      out[i] = -inv_n;
    }
  }
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& config,
               std::span<const unsigned char> decay_mask) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!decay_mask.empty() && decay_mask.size() != params.size()) {
    throw std::invalid_argument("adam_step: decay mask size differs from parameter count");
  }
  state.step_count += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const auto t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (config.weight_decay != 0.0 && (decay_mask.empty() || decay_mask[i] != 0)) {
      g += config.weight_decay * params[i];
    }
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
  }
}

namespace {

bool plateaued(const std::vector<double>& history, const TrainConfig& config) {
  if (!config.early_stopping || history.size() <= config.plateau_window) return false;
  const double now = history.back();
  const double then = history[history.size() - 1 - config.plateau_window];
  const double scale = std::max(std::abs(then), 1e-300);
  return std::abs(then - now) / scale < config.plateau_tolerance;
}

template <typename Model, typename Predict, typename Gradient>
TrainResult<Model> run_training(Model model, const ObservationSet& obs, const TrainConfig& config,
                                std::span<const unsigned char> decay_mask, Predict predict, Gradient gradient) {
  config.validate();
  if (obs.empty()) throw std::invalid_argument("cannot train on an empty observation set");
  if (!(obs.shape() == model.shape())) throw std::invalid_argument("observation shape differs from model shape");

  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> actual = obs.values();
  std::vector<double> predicted(obs.size());
  AdamState state(model.parameters().size());
  TrainTrace trace;
  trace.train_mae.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < obs.size(); ++i) predicted[i] = predict(model, obs[i].index);
    const double loss = mae(actual, predicted);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch + 1));
    }
    trace.train_mae.push_back(loss);
    std::vector<double> grads = gradient(model, obs, mae_subgradient(actual, predicted));
    adam_step(model.parameters(), grads, state, config, decay_mask);
    if (plateaued(trace.train_mae, config)) break;
  }
  trace.epochs_run = trace.train_mae.size();
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(trace)};
}

}  // namespace

TrainResult<CpdModel> train(CpdModel model, const ObservationSet& train_obs, const TrainConfig& config) {
  if (config.smoothness) config.smoothness->validate(model.shape());
  const auto gradient = [&config](const CpdModel& m, const ObservationSet& obs, std::span<const double> lg) {
    auto grads = cpd_gradient(m, obs, lg);
    if (config.smoothness && config.smoothness->weight > 0.0) {
      const auto penalty = smoothness_penalty(m, *config.smoothness);
      for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += penalty.gradient[i];
    }
    return grads;
  };
  const auto predict = [](const CpdModel& m, const MultiIndex& idx) { return cpd_predict(m, idx); };
  return run_training(std::move(model), train_obs, config, {}, predict, gradient);
}

TrainResult<NeuralTcModel> train(NeuralTcModel model, const ObservationSet& train_obs, const TrainConfig& config) {
  if (config.smoothness) throw std::invalid_argument("smoothness regularization applies to CPD models only");
  const auto mask = model.decay_mask();
  const auto predict = [](const NeuralTcModel& m, const MultiIndex& idx) { return neural_predict(m, idx); };
  const auto gradient = [](const NeuralTcModel& m, const ObservationSet& obs, std::span<const double> lg) {
    return neural_gradient(m, obs, lg);
  };
  return run_training(std::move(model), train_obs, config, mask, predict, gradient);
}

void write_trace_csv(const TrainTrace& trace, std::ostream& out) {
  out << "epoch,train_mae\n";
  for (std::size_t i = 0; i < trace.train_mae.size(); ++i) {
    out << (i + 1) << ',' << format_double(trace.train_mae[i]) << '\n';
  }
}

}  // namespace latticomp
