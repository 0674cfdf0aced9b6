#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "latticomp/cpd.hpp"
#include "latticomp/neural.hpp"
#include "latticomp/tensor.hpp"

namespace latticomp {

struct TrainConfig {
  double learning_rate = 0.01;
  /// Coupled L2: decay * parameter is added to the gradient before the
  /// moment updates.
  double weight_decay = 0.01;
  std::size_t epochs = 2000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// CPD only.
  std::optional<SmoothnessSpec> smoothness;
  /// Stop once training MAE changes by less than `plateau_tolerance`
  /// (relative) over `plateau_window` epochs.
  bool early_stopping = false;
  std::size_t plateau_window = 50;
  double plateau_tolerance = 1e-6;

  void validate() const;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;

  AdamState() = default;
  explicit AdamState(std::size_t parameter_count)
      : first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
};

struct TrainTrace {
  /// Training MAE of the predictions each epoch's update was computed from.
  std::vector<double> train_mae;
  std::size_t epochs_run = 0;
  double wall_seconds = 0.0;
};

template <typename Model>
struct TrainResult {
  Model model;
  TrainTrace trace;
};

double mae(std::span<const double> actual, std::span<const double> predicted);

/// sign(predicted - actual) / n per entry, with sign(0) = 0.
std::vector<double> mae_subgradient(std::span<const double> actual, std::span<const double> predicted);

/// One bias-corrected Adam update in place. `decay_mask`, when non-empty,
/// selects the parameters that receive weight decay.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& config,
               std::span<const unsigned char> decay_mask = {});

/// Full-batch masked-completion training on the observed cells only.
TrainResult<CpdModel> train(CpdModel model, const ObservationSet& train_obs, const TrainConfig& config);
TrainResult<NeuralTcModel> train(NeuralTcModel model, const ObservationSet& train_obs, const TrainConfig& config);

/// `epoch,train_mae` with 1-based epochs.
void write_trace_csv(const TrainTrace& trace, std::ostream& out);

}  // namespace latticomp
