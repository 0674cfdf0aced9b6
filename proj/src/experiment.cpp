#include "latticomp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "latticomp/format.hpp"
#include "latticomp/hash.hpp"
#include "latticomp/rng.hpp"
#include "latticomp/training.hpp"

namespace latticomp {

Dataset dataset_from(const SyntheticDataset& synthetic) {
  return {ObservationSet::from_dense(synthetic.truth), synthetic.space};
}

void SweepConfig::validate() const {
  if (methods.empty()) throw std::invalid_argument("sweep needs at least one method");
  if (iterations == 0) throw std::invalid_argument("iterations must be at least 1");
  if (jobs == 0) throw std::invalid_argument("jobs must be at least 1");
  std::set<std::string> names;
  for (const auto& m : methods) {
    m.validate();
    if (!names.insert(m.name).second) throw std::invalid_argument("duplicate method name '" + m.name + "'");
  }
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t group_key, std::uint64_t iteration) {
  return base_seed ^ mix64((group_key << 32) | (iteration & 0xffffffffULL));
}

namespace {

struct TrialPlan {
  std::uint64_t group_key = 0;
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
  std::vector<MultiIndex> train;
  bool want_parity = false;
};

struct TrialOutput {
  std::vector<TrialResult> results;
  std::vector<ParityRecord> parity;
};

struct PropertyStats {
  std::vector<double> mean;
  std::vector<double> scale;
};

PropertyStats property_stats(const ObservationSet& train, const DesignSpace& space) {
  const std::size_t levels = space.property_mode ? space.modes[*space.property_mode].labels.size() : 1;
  PropertyStats s{std::vector<double>(levels, 0.0), std::vector<double>(levels, 0.0)};
  std::vector<std::size_t> count(levels, 0);
  auto level = [&](const Observation& o) { return space.property_mode ? o.index[*space.property_mode] : 0; };
  for (const auto& o : train.entries()) {
    s.mean[level(o)] += o.value;
    ++count[level(o)];
  }
  for (std::size_t p = 0; p < levels; ++p) s.mean[p] = count[p] ? s.mean[p] / static_cast<double>(count[p]) : 0.0;
  for (const auto& o : train.entries()) {
    const double d = o.value - s.mean[level(o)];
    s.scale[level(o)] += d * d;
  }
  for (std::size_t p = 0; p < levels; ++p) {
    const double sd = count[p] ? std::sqrt(s.scale[p] / static_cast<double>(count[p])) : 0.0;
    s.scale[p] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

TrialOutput run_trial(const Dataset& data, const SweepConfig& config, const TrialPlan& plan) {
  const auto split = split_observations(data.cells, plan.train);
  if (split.train.empty()) throw std::invalid_argument("trial has an empty training set");
  for (const auto& o : split.test.entries()) {
    if (split.train.contains(o.index)) throw std::logic_error("test cell found in the training set");
  }
  const auto test_cells = split.test.indices();
  const auto actual = split.test.values();
  const auto& pm = data.space.property_mode;
  const auto stats = property_stats(split.train, data.space);

  std::vector<std::size_t> level(test_cells.size(), 0);
  if (pm) {
    for (std::size_t i = 0; i < test_cells.size(); ++i) level[i] = test_cells[i][*pm];
  }
  std::vector<double> actual_z(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    actual_z[i] = (actual[i] - stats.mean[level[i]]) / stats.scale[level[i]];
  }

  TrialOutput out;
  for (const auto& spec : config.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto method = train_method(spec, split.train, data.space, derive_seed(plan.seed, fnv1a64(spec.name)));
    const auto predicted = predict(method, test_cells);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<double> predicted_z(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      predicted_z[i] = (predicted[i] - stats.mean[level[i]]) / stats.scale[level[i]];
    }

    TrialResult r;
    r.method = spec.name;
    r.group_key = plan.group_key;
    r.iteration = plan.iteration;
    r.seed = plan.seed;
    r.train_size = split.train.size();
    r.r2 = r2(actual_z, predicted_z);
    r.mae = mae(actual, predicted);
    r.train_seconds = config.record_timing ? seconds : 0.0;
    if (pm) {
      for (std::size_t p = 0; p < stats.mean.size(); ++p) {
        std::vector<double> a;
        std::vector<double> b;
        for (std::size_t i = 0; i < actual.size(); ++i) {
          if (level[i] != p) continue;
          a.push_back(actual[i]);
          b.push_back(predicted[i]);
        }
        const bool defined = a.size() >= 2 && std::any_of(a.begin(), a.end(), [&](double v) { return v != a[0]; });
        r.property_r2.push_back(defined ? r2(a, b) : std::numeric_limits<double>::quiet_NaN());
      }
    }
    out.results.push_back(std::move(r));

    if (plan.want_parity) {
      ParityRecord rec{spec.name, actual, predicted, actual_z, predicted_z, {}};
      for (std::size_t i = 0; i < test_cells.size(); ++i) {
        rec.labels.push_back(pm ? data.space.modes[*pm].labels[level[i]] : std::string());
      }
      out.parity.push_back(std::move(rec));
    }
  }
  return out;
}

SweepResult run_plans(const Dataset& data, const SweepConfig& config, const std::vector<TrialPlan>& plans) {
  std::vector<TrialOutput> outputs(plans.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < plans.size(); i = next++) {
      try {
        outputs[i] = run_trial(data, config, plans[i]);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = plans.size();
      }
    }
  };
  const std::size_t threads = std::min(config.jobs, plans.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult result;
  for (auto& o : outputs) {
    for (auto& r : o.results) result.trials.push_back(std::move(r));
    for (auto& p : o.parity) result.parity.push_back(std::move(p));
  }
  result.reports = aggregate(result.trials);
  return result;
}

}  // namespace

std::vector<ExperimentReport> aggregate(std::span<const TrialResult> trials) {
  std::vector<std::pair<std::uint64_t, std::string>> keys;
  std::map<std::pair<std::uint64_t, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& t : trials) {
    const auto key = std::make_pair(t.group_key, t.method);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].first.push_back(t.r2);
    groups[key].second.push_back(t.mae);
  }
  std::vector<ExperimentReport> out;
  for (const auto& key : keys) {
    const auto& [r2s, maes] = groups[key];
    const auto r = mean_std(r2s);
    const auto m = mean_std(maes);
    out.push_back({key.second, key.first, r.mean, r.std, m.mean, m.std, r2s.size()});
  }
  return out;
}

SweepResult run_uniform_sweep(const Dataset& data, const SweepConfig& config, std::span<const std::size_t> train_sizes) {
  config.validate();
  if (train_sizes.empty()) throw std::invalid_argument("uniform sweep needs at least one train size");
  const auto cells = data.cells.indices();
  for (std::size_t n : train_sizes) {
    if (n == 0 || n + 2 > cells.size()) {
      throw std::invalid_argument("train size " + std::to_string(n) + " must be in [1, " +
                                  std::to_string(cells.size() - 2) + "] to leave a test set");
    }
  }
  const std::size_t largest = *std::max_element(train_sizes.begin(), train_sizes.end());
  std::vector<TrialPlan> plans;
  bool parity_taken = false;
  for (std::size_t n : train_sizes) {
    for (std::size_t it = 0; it < config.iterations; ++it) {
      TrialPlan p;
      p.group_key = n;
      p.iteration = it;
      p.seed = trial_seed(config.base_seed, n, it);
      p.train = uniform_sample(cells, n, p.seed);
      p.want_parity = !parity_taken && n == largest && it == 0;
      parity_taken = parity_taken || p.want_parity;
      plans.push_back(std::move(p));
    }
  }
  return run_plans(data, config, plans);
}

SweepResult run_bias_sweep(const Dataset& data, const SweepConfig& config, std::span<const int> experiments,
                           bool fix_quotas) {
  config.validate();
  if (experiments.empty()) throw std::invalid_argument("bias sweep needs at least one experiment number");
  const auto cells = data.cells.indices();
  const std::size_t slices = data.space.modes.at(data.space.slice_mode).labels.size();
  std::vector<TrialPlan> plans;
  std::vector<QuotaRow> quotas;
  for (int e : experiments) {
    quota_lower_bound(e);  // validates the experiment number
    const auto group = static_cast<std::uint64_t>(e);
    for (std::size_t it = 0; it < config.iterations; ++it) {
      TrialPlan p;
      p.group_key = group;
      p.iteration = it;
      p.seed = trial_seed(config.base_seed, group, it);
      auto plan = biased_quotas(e, fix_quotas ? trial_seed(config.base_seed, group, 0) : p.seed, slices);
      plan.seed = p.seed;
      p.train = biased_sample(cells, data.space.slice_mode, plan);
      quotas.push_back({e, it, plan});
      plans.push_back(std::move(p));
    }
  }
  auto result = run_plans(data, config, plans);
  result.quotas = std::move(quotas);
  return result;
}

void write_trials_csv(std::ostream& out, std::span<const TrialResult> trials) {
  out << "method,group_key,iteration,seed,train_size,r2,mae,train_seconds\n";
  for (const auto& t : trials) {
    out << t.method << ',' << t.group_key << ',' << t.iteration << ',' << t.seed << ',' << t.train_size << ','
        << format_double(t.r2) << ',' << format_double(t.mae) << ',' << format_double(t.train_seconds) << '\n';
  }
}

void write_aggregated_csv(std::ostream& out, std::span<const ExperimentReport> reports) {
  out << "method,group_key,mean_r2,std_r2,mean_mae,std_mae\n";
  for (const auto& r : reports) {
    out << r.method << ',' << r.group_key << ',' << format_double(r.mean_r2) << ',' << format_double(r.std_r2) << ','
        << format_double(r.mean_mae) << ',' << format_double(r.std_mae) << '\n';
  }
}

void write_trials_by_property_csv(std::ostream& out, std::span<const TrialResult> trials,
                                  std::span<const std::string> property_labels) {
  out << "method,group_key,iteration,property,r2\n";
  for (const auto& t : trials) {
    if (t.property_r2.size() != property_labels.size()) {
      throw std::invalid_argument("property labels do not match per-property results");
    }
    for (std::size_t p = 0; p < property_labels.size(); ++p) {
      out << t.method << ',' << t.group_key << ',' << t.iteration << ',' << property_labels[p] << ','
          << (std::isnan(t.property_r2[p]) ? std::string("nan") : format_double(t.property_r2[p])) << '\n';
    }
  }
}

void write_parity_csv(std::ostream& out, const ParityRecord& record, bool normalized) {
  const auto& a = normalized ? record.actual_normalized : record.actual;
  const auto& p = normalized ? record.predicted_normalized : record.predicted;
  out << "actual,predicted,property_label\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    out << format_double(a[i]) << ',' << format_double(p[i]) << ',' << record.labels[i] << '\n';
  }
}

}  // namespace latticomp
