#include "latticomp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "latticomp/rng.hpp"

namespace latticomp {

namespace {

// Positions of `k` distinct elements out of `n`, ascending.
std::vector<std::size_t> pick_positions(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pos[i], pos[j]);
  }
  pos.resize(k);
  std::sort(pos.begin(), pos.end());
  return pos;
}

}  // namespace

std::vector<MultiIndex> uniform_sample(std::span<const MultiIndex> cells, std::size_t n, std::uint64_t seed) {
  if (n > cells.size()) {
    throw std::invalid_argument("cannot sample " + std::to_string(n) + " cells from " + std::to_string(cells.size()));
  }
  Rng rng(seed);
  std::vector<MultiIndex> out;
  out.reserve(n);
  for (std::size_t p : pick_positions(cells.size(), n, rng)) out.push_back(cells[p]);
  return out;
}

int quota_lower_bound(int experiment) {
  if (experiment < kMinExperiment || experiment > kMaxExperiment) {
    throw std::invalid_argument("experiment number must be in 1..10, got " + std::to_string(experiment));
  }
  return 3 + 2 * (experiment - 1);
}

BiasedSamplingPlan biased_quotas(int experiment, std::uint64_t seed, std::size_t slice_count) {
  BiasedSamplingPlan plan;
  plan.experiment = experiment;
  plan.lower = quota_lower_bound(experiment);
  plan.seed = seed;
  if (slice_count == 0) throw std::invalid_argument("biased sampling needs at least one slice");

  Rng rng(seed);
  std::vector<double> draws(slice_count);
  for (auto& d : draws) d = rng.exponential(plan.scale);
  const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  const double width = plan.upper - plan.lower;

  plan.quotas.reserve(slice_count);
  for (double d : draws) {
    const double mapped = span > 0.0 ? plan.lower + (d - lo) / span * width : plan.upper;
    // nearbyint honours the default round-to-nearest-even mode.
    const double q = std::clamp(std::nearbyint(mapped), static_cast<double>(plan.lower), static_cast<double>(plan.upper));
    plan.quotas.push_back(static_cast<std::size_t>(q));
  }
  return plan;
}

std::vector<MultiIndex> biased_sample(std::span<const MultiIndex> cells, std::size_t biased_mode,
                                      const BiasedSamplingPlan& plan) {
  const std::size_t slices = plan.quotas.size();
  std::vector<std::vector<std::size_t>> members(slices);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (biased_mode >= cells[i].size()) throw std::invalid_argument("biased mode exceeds cell order");
    const std::size_t s = cells[i][biased_mode];
    if (s >= slices) {
      throw std::invalid_argument("cell slice " + std::to_string(s) + " has no quota (plan covers " +
                                  std::to_string(slices) + " slices)");
    }
    members[s].push_back(i);
  }

  std::vector<std::size_t> chosen;
  for (std::size_t s = 0; s < slices; ++s) {
    if (plan.quotas[s] > members[s].size()) {
      throw std::invalid_argument("quota " + std::to_string(plan.quotas[s]) + " exceeds size " +
                                  std::to_string(members[s].size()) + " of slice " + std::to_string(s));
    }
    Rng rng(derive_seed(plan.seed ^ 0x5a5a5a5a5a5a5a5aULL, s));
    for (std::size_t p : pick_positions(members[s].size(), plan.quotas[s], rng)) chosen.push_back(members[s][p]);
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<MultiIndex> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(cells[i]);
  return out;
}

void write_quota_table(std::ostream& out, std::span<const std::string> slice_names, std::span<const QuotaRow> rows) {
  out << "experiment,iteration";
  for (const auto& name : slice_names) out << ',' << name;
  out << ",range\n";
  for (const auto& row : rows) {
    if (row.plan.quotas.size() != slice_names.size()) {
      throw std::invalid_argument("quota row width does not match slice names");
    }
    out << row.experiment << ',' << row.iteration;
    for (std::size_t q : row.plan.quotas) out << ',' << q;
    out << ",\"[" << row.plan.lower << ", " << row.plan.upper << "]\"\n";
  }
}

}  // namespace latticomp
