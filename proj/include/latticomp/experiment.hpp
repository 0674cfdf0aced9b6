#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "latticomp/dataio.hpp"
#include "latticomp/methods.hpp"
#include "latticomp/metrics.hpp"
#include "latticomp/sampling.hpp"

namespace latticomp {

/// Ground-truth cells a sweep samples from and evaluates on.
struct Dataset {
  ObservationSet cells;
  DesignSpace space;
};

Dataset dataset_from(const SyntheticDataset& synthetic);

struct SweepConfig {
  std::vector<MethodSpec> methods;
  std::size_t iterations = 5;
  std::uint64_t base_seed = 0;
  /// Worker threads; results do not depend on it.
  std::size_t jobs = 1;
  /// Wall-clock training time is nondeterministic, so it is only recorded on
  /// request; otherwise the column is 0.
  bool record_timing = false;

  void validate() const;
};

/// base_seed XOR mix64(group_key << 32 | iteration). Sampling uses this seed
/// directly; a method named `name` trains with derive_seed(seed, fnv1a64(name)).
std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t group_key, std::uint64_t iteration);

struct TrialResult {
  std::string method;
  /// Train size for uniform sweeps, experiment number for bias sweeps.
  std::uint64_t group_key = 0;
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  /// Joint R^2 over the test cells, after per-property z-scoring with the
  /// training cells' statistics when the space has a property mode.
  double r2 = 0.0;
  /// Raw-scale MAE over the test cells.
  double mae = 0.0;
  double train_seconds = 0.0;
  /// Raw-scale R^2 per property level (NaN when undefined). Empty without a
  /// property mode.
  std::vector<double> property_r2;
};

struct ExperimentReport {
  std::string method;
  std::uint64_t group_key = 0;
  double mean_r2 = 0.0;
  double std_r2 = 0.0;
  double mean_mae = 0.0;
  double std_mae = 0.0;
  std::size_t iterations = 0;
};

struct ParityRecord {
  std::string method;
  std::vector<double> actual;
  std::vector<double> predicted;
  /// Same pairs z-scored per property with the training statistics.
  std::vector<double> actual_normalized;
  std::vector<double> predicted_normalized;
  std::vector<std::string> labels;
};

struct SweepResult {
  /// Ordered by group, then iteration, then method.
  std::vector<TrialResult> trials;
  /// Ordered by group, then method.
  std::vector<ExperimentReport> reports;
  /// Bias sweeps only: the plan used by each (experiment, iteration).
  std::vector<QuotaRow> quotas;
  /// One record per method for the designated trial (uniform sweeps: largest
  /// size, first iteration).
  std::vector<ParityRecord> parity;
};

SweepResult run_uniform_sweep(const Dataset& data, const SweepConfig& config, std::span<const std::size_t> train_sizes);

/// With `fix_quotas`, every iteration of an experiment reuses the quotas of
/// iteration 0 and only the cells drawn within each slice change.
SweepResult run_bias_sweep(const Dataset& data, const SweepConfig& config, std::span<const int> experiments,
                           bool fix_quotas = false);

/// Mean/std per (group, method) in first-appearance order.
std::vector<ExperimentReport> aggregate(std::span<const TrialResult> trials);

void write_trials_csv(std::ostream& out, std::span<const TrialResult> trials);
void write_aggregated_csv(std::ostream& out, std::span<const ExperimentReport> reports);
void write_trials_by_property_csv(std::ostream& out, std::span<const TrialResult> trials,
                                  std::span<const std::string> property_labels);
void write_parity_csv(std::ostream& out, const ParityRecord& record, bool normalized);

}  // namespace latticomp
