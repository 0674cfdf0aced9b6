#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "latticomp/tensor.hpp"

namespace latticomp {

/// `n` distinct cells drawn uniformly without replacement, returned in the
/// order they appear in `cells`.
std::vector<MultiIndex> uniform_sample(std::span<const MultiIndex> cells, std::size_t n, std::uint64_t seed);

inline constexpr int kMinExperiment = 1;
inline constexpr int kMaxExperiment = 10;

/// Slice quotas for one biased-sampling experiment. Experiment e allows
/// quotas in [3 + 2(e - 1), 40].
struct BiasedSamplingPlan {
  int experiment = 1;
  double scale = 1.0;
  int lower = 3;
  int upper = 40;
  std::vector<std::size_t> quotas;
  std::uint64_t seed = 0;
};

int quota_lower_bound(int experiment);

/// One exponential(scale) draw per slice, mapped affinely so the smallest
/// lands on the lower bound and the largest on 40, then rounded half-to-even.
BiasedSamplingPlan biased_quotas(int experiment, std::uint64_t seed, std::size_t slice_count = 5);

/// Samples `plan.quotas[s]` distinct cells uniformly from each slice s of
/// `biased_mode`. Output keeps the order of `cells`.
std::vector<MultiIndex> biased_sample(std::span<const MultiIndex> cells, std::size_t biased_mode,
                                      const BiasedSamplingPlan& plan);

struct QuotaRow {
  int experiment = 1;
  std::size_t iteration = 0;
  BiasedSamplingPlan plan;
};

/// `experiment,iteration,<slice names...>,range` with the range written as a
/// quoted "[l, 40]".
void write_quota_table(std::ostream& out, std::span<const std::string> slice_names, std::span<const QuotaRow> rows);

}  // namespace latticomp
