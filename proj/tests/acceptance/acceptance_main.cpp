// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "latticomp/cli.hpp"
#include "latticomp/cpd.hpp"
#include "latticomp/dataio.hpp"
#include "latticomp/ensemble.hpp"
#include "latticomp/experiment.hpp"
#include "latticomp/forest.hpp"
#include "latticomp/gp.hpp"
#include "latticomp/methods.hpp"
#include "latticomp/metrics.hpp"
#include "latticomp/neural.hpp"
#include "latticomp/rng.hpp"
#include "latticomp/sampling.hpp"
#include "latticomp/serialize.hpp"
#include "latticomp/training.hpp"
#include "../test_support.hpp"

namespace fs = std::filesystem;
using namespace latticomp;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

ObservationSet random_observations(const Shape& shape, Rng& rng) {
  std::vector<Observation> entries;
  for (const auto& idx : all_cells(shape)) {
    if (rng.uniform() < 0.7) entries.push_back({idx, rng.normal()});
  }
  if (entries.empty()) entries.push_back({all_cells(shape).front(), 1.0});
  return ObservationSet(shape, entries);
}

double kink_distance(const NeuralTcModel& model, const ObservationSet& obs) {
  double closest = std::numeric_limits<double>::infinity();
  const auto p = model.parameters();
  for (const auto& e : obs.entries()) {
    std::vector<double> a;
    for (std::size_t n = 0; n < model.shape().order(); ++n)
      for (std::size_t k = 0; k < model.rank(); ++k) a.push_back(model.embedding(n, e.index[n], k));
    for (std::size_t l = 0; l + 1 < model.layer_count(); ++l) {
      std::vector<double> next(model.layer_out(l));
      for (std::size_t o = 0; o < next.size(); ++o) {
        double z = p[model.bias_offset(l) + o];
        for (std::size_t i = 0; i < a.size(); ++i) z += p[model.weight_offset(l) + o * a.size() + i] * a[i];
        closest = std::min(closest, std::abs(z));
        next[o] = std::max(z, 0.0);
      }
      a = next;
    }
  }
  return closest;
}

// Loss is sum_i w_i * prediction_i (+ smoothness penalty); its analytic
// gradient is compared against central differences of predictions only.
void gradient_correctness(Outcome& out) {
  Rng rng(20240601);
  double worst = 0.0;
  int checked = 0;
  int skipped_kinks = 0;
  for (int i = 0; i < 20; ++i) {
    const Shape shape{2 + rng.below(3), 2 + rng.below(4), 1 + rng.below(3)};
    const std::size_t rank = 1 + rng.below(4);
    const auto obs = random_observations(shape, rng);
    std::vector<double> w(obs.size());
    for (auto& v : w) v = rng.normal();
    std::vector<double> analytic;
    std::vector<double> numeric;

    if (i % 3 != 2) {
      const bool smooth = i % 3 == 1;
      const auto model = CpdModel::random(shape, rank, 500 + static_cast<std::uint64_t>(i));
      const SmoothnessSpec penalty{{1}, 0.1};
      const auto loss = [&](std::span<const double> p) {
        const CpdModel m(shape, rank, std::vector<double>(p.begin(), p.end()));
        double sum = 0.0;
        for (std::size_t k = 0; k < obs.size(); ++k) sum += w[k] * cpd_predict(m, obs[k].index);
        return smooth ? sum + smoothness_penalty(m, penalty).value : sum;
      };
      analytic = cpd_gradient(model, obs, w);
      if (smooth) {
        const auto pen = smoothness_penalty(model, penalty);
        for (std::size_t k = 0; k < analytic.size(); ++k) analytic[k] += pen.gradient[k];
      }
      numeric = testing::finite_difference({model.parameters().begin(), model.parameters().end()}, loss);
    } else {
      const std::vector<std::size_t> hidden = {2 + rng.below(5), 2 + rng.below(3)};
      NeuralTcModel model;
      for (std::uint64_t s = 0;; ++s) {
        model = NeuralTcModel::random(shape, rank, hidden, 900 + static_cast<std::uint64_t>(i) * 100 + s);
        if (kink_distance(model, obs) >= 1e-3) break;
        ++skipped_kinks;
      }
      const auto loss = [&](std::span<const double> p) {
        const NeuralTcModel m(shape, rank, hidden, std::vector<double>(p.begin(), p.end()));
        double sum = 0.0;
        for (std::size_t k = 0; k < obs.size(); ++k) sum += w[k] * neural_predict(m, obs[k].index);
        return sum;
      };
      analytic = neural_gradient(model, obs, w);
      numeric = testing::finite_difference({model.parameters().begin(), model.parameters().end()}, loss);
    }
    const double err = testing::relative_error(analytic, numeric);
    worst = std::max(worst, err);
    out.require(err <= 1e-4, "model " + std::to_string(i) + " relative error " + std::to_string(err));
    ++checked;
  }
  out.detail << checked << " models, worst relative error " << worst << ", neural redraws near kinks "
             << skipped_kinks;
}

ObservationSplit sixty_percent_split(const DenseTensor& truth, std::uint64_t seed) {
  const auto all = ObservationSet::from_dense(truth);
  const auto n = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(all.size())));
  return split_observations(all, uniform_sample(all.indices(), n, seed));
}

// Plain CPD training with weight decay off: on noiseless data the L2 term
// pulls the optimum away from the exact factors.
void exact_recovery(Outcome& out) {
  const Shape shape{5, 27, 2};
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto truth = low_rank_tensor(shape, 2, seed);
    const auto split = sixty_percent_split(truth, derive_seed(seed, 1));
    TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.weight_decay = 0.0;
    cfg.seed = seed;
    const auto result = train(CpdModel::random(shape, 2, derive_seed(seed, 2)), split.train, cfg);
    std::vector<double> pred;
    for (const auto& e : split.test.entries()) pred.push_back(cpd_predict(result.model, e.index));
    const double score = r2(split.test.values(), pred);
    worst = std::min(worst, score);
    out.require(score >= 0.95, "seed " + std::to_string(seed) + " R2 " + std::to_string(score));
  }
  out.detail << "5 seeds, train 162 / test 108, worst held-out R2 " << worst;
}

template <typename F>
bool throws(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument&) {
    return true;
  }
  return false;
}

void metric_oracles(Outcome& out) {
  using V = std::vector<double>;
  out.require(mae(V{1, 2, 3}, V{1, 2, 3}) == 0.0, "mae identical");
  out.require(mae(V{1, 2}, V{1, 3}) == 0.5, "mae half");
  out.require(mae(V{0}, V{-2}) == 2.0, "mae absolute");
  out.require(mae_subgradient(V{1}, V{3}) == V{1.0}, "subgradient single");
  out.require(mae_subgradient(V{1, 1}, V{0, 2}) == (V{-0.5, 0.5}), "subgradient signs");
  out.require(mae_subgradient(V{4, 5}, V{4, 5}) == (V{0.0, 0.0}), "subgradient ties");
  const V a = {1.0, 2.0, 4.0, 7.0};
  out.require(r2(a, a) == 1.0, "r2 perfect");
  out.require(r2(a, V(4, 3.5)) == 0.0, "r2 mean predictor");
  out.require(r2(V{0, 1}, V{1, 0}) == -3.0, "r2 -3");
  out.require(throws([] { r2(V{2, 2, 2}, V{1, 2, 3}); }), "r2 constant actual");
  out.require(throws([] { mae(V{}, V{}); }), "mae empty");
  out.require(throws([] { mae(V{1, 2}, V{1}); }), "mae mismatch");
  out.detail << "mae, mae_subgradient and r2 tabulated examples";
}

void sampler_fidelity(Outcome& out) {
  std::size_t plans = 0;
  for (int e = kMinExperiment; e <= kMaxExperiment; ++e) {
    const int lower = 3 + 2 * (e - 1);
    out.require(quota_lower_bound(e) == lower, "lower bound e=" + std::to_string(e));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto plan = biased_quotas(e, seed);
      ++plans;
      out.require(plan.lower == lower && plan.upper == 40, "range e=" + std::to_string(e));
      for (auto q : plan.quotas) {
        if (q < static_cast<std::size_t>(lower) || q > 40) {
          out.require(false, "quota " + std::to_string(q) + " outside e=" + std::to_string(e));
        }
      }
    }
  }
  std::size_t skewed = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto plan = biased_quotas(1, 1'000'000 + seed);
    const auto [lo, hi] = std::minmax_element(plan.quotas.begin(), plan.quotas.end());
    if (static_cast<double>(*hi) > 3.0 * static_cast<double>(*lo)) ++skewed;
  }
  out.require(skewed >= 900, "skew held in " + std::to_string(skewed) + "/1000");

  // Realized draws honor the quotas slice by slice.
  const auto data = generate_synthetic(SyntheticSpec{});
  const auto cells = ObservationSet::from_dense(data.truth).indices();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto plan = biased_quotas(1 + static_cast<int>(seed % 10), seed);
    std::vector<std::size_t> counts(5, 0);
    for (const auto& c : biased_sample(cells, 0, plan)) ++counts[c[0]];
    out.require(counts == plan.quotas, "realized counts seed " + std::to_string(seed));
  }
  out.detail << plans << " plans in range, experiment-1 skew in " << skewed << "/1000 draws";
}

double smooth_function(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += std::sin(1.3 * x[j] + 0.4 * static_cast<double>(j));
  return s;
}

void gp_sanity(Outcome& out) {
  const auto space = default_design_space(Shape{5, 27, 2});
  const auto kinds = space.kinds();
  const auto cells = all_cells(space.shape());
  const auto train_cells = uniform_sample(cells, 50, 77);
  std::vector<MultiIndex> test_cells;
  for (const auto& c : cells) {
    if (!std::binary_search(train_cells.begin(), train_cells.end(), c)) test_cells.push_back(c);
  }
  const auto x_train = encode_cells(train_cells, space.shape(), kinds);
  const auto x_test = encode_cells(test_cells, space.shape(), kinds);
  const auto target = [](const Eigen::MatrixXd& x) {
    std::vector<double> y(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::RowVectorXd row = x.row(i);
      y[static_cast<std::size_t>(i)] = smooth_function(std::span<const double>(row.data(), row.size()));
    }
    return y;
  };
  const GpKernelConfig cfg;
  const auto model = gp_fit(x_train, target(x_train), cfg);
  const auto pred = gp_predict(model, x_test);
  const double score = r2(target(x_test), pred.mean);
  out.require(score >= 0.9, "held-out R2 " + std::to_string(score));

  Rng rng(5);
  Eigen::MatrixXd probes(500, x_train.cols());
  for (Eigen::Index i = 0; i < probes.rows(); ++i)
    for (Eigen::Index j = 0; j < probes.cols(); ++j) probes(i, j) = rng.uniform(-1.0, 2.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Eigen::MatrixXd* q : {&x_train, &x_test, static_cast<const Eigen::MatrixXd*>(&probes)}) {
    for (double v : gp_predict(model, *q).variance) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  out.require(lo >= 0.0 && hi <= cfg.constant_value, "variance range [" + std::to_string(lo) + ", " +
                                                          std::to_string(hi) + "]");
  out.detail << "50 train / " << test_cells.size() << " held out, R2 " << score << ", variance in [" << lo << ", "
             << hi << "] with prior " << cfg.constant_value;
}

void bias_robustness(Outcome& out) {
  const auto data = dataset_from(generate_synthetic(SyntheticSpec{}));
  SweepConfig cfg;
  MethodSpec ensemble;
  ensemble.name = "ensemble";
  ensemble.kind = MethodKind::ensemble;
  MethodSpec gp;
  gp.name = "gp";
  gp.kind = MethodKind::gp;
  cfg.methods = {ensemble, gp};
  cfg.iterations = 5;
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  const std::vector<int> experiments = {1, 10};
  const auto result = run_bias_sweep(data, cfg, experiments);
  const auto mean = [&](const std::string& method, std::uint64_t e) {
    for (const auto& r : result.reports) {
      if (r.method == method && r.group_key == e) return r.mean_r2;
    }
    throw std::logic_error("missing report");
  };
  const double ens1 = mean("ensemble", 1);
  const double ens10 = mean("ensemble", 10);
  const double gp1 = mean("gp", 1);
  const double gp10 = mean("gp", 10);
  out.require(ens1 >= gp1 - 0.02, "ensemble below GP at e=1");
  out.require(ens10 - ens1 <= gp10 - gp1 + 0.05, "ensemble drop exceeds GP drop + 0.05");
  out.detail << "mean R2 e=1: ensemble " << ens1 << ", gp " << gp1 << "; e=10: ensemble " << ens10 << ", gp "
             << gp10 << "; drops " << ens10 - ens1 << " vs " << gp10 - gp1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism(Outcome& out) {
  const auto root = fs::temp_directory_path() / "latticomp_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string methods = R"([
    {"kind": "cpd", "rank": 2, "train": {"epochs": 300}},
    {"kind": "cpd_s", "rank": 2, "train": {"epochs": 300}},
    {"kind": "neural", "rank": 8, "hidden_sizes": [8], "train": {"epochs": 150}},
    "gp",
    {"kind": "ensemble", "members": [{"kind": "cpd", "rank": 1, "train": {"epochs": 200}},
                                     {"kind": "neural", "rank": 4, "hidden_sizes": [4], "train": {"epochs": 100}}],
     "forest": {"tree_count": 30}}])";
  std::ofstream(root / "uniform.json") << R"({"schema_version": 1, "dataset": {"synthetic": {}}, "methods": )"
                                       << methods << R"(, "train_sizes": [50, 100], "iterations": 3})";
  std::ofstream(root / "bias.json") << R"({"schema_version": 1, "dataset": {"synthetic": {}}, "methods": )" << methods
                                    << R"(, "experiments": [1, 5, 10], "iterations": 3})";
  std::size_t compared = 0;
  for (const std::string command : {"uniform", "bias"}) {
    std::vector<fs::path> dirs;
    for (const std::string jobs : {"1", "2", "4"}) {
      const auto dir = root / (command + "_j" + jobs);
      std::ostringstream sink;
      const int code = run_cli({command, "--config", (root / (command + ".json")).string(), "--out", dir.string(),
                                "--jobs", jobs, "--quiet"},
                               sink, sink);
      out.require(code == 0, command + " --jobs " + jobs + " exited " + std::to_string(code) + ": " + sink.str());
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      const auto reference = slurp(entry.path());
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        out.require(reference == slurp(dirs[k] / entry.path().filename()),
                    command + " " + entry.path().filename().string() + " differs");
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  out.require(compared > 0, "no CSVs compared");
  out.detail << compared << " CSV comparisons across --jobs 1/2/4";
}

void round_trips(Outcome& out) {
  const auto data = generate_synthetic(SyntheticSpec{});
  std::stringstream dense;
  write_csv(dense, data.truth, data.space);
  const auto loaded = read_csv(dense, data.space);
  out.require(loaded.space == data.space, "design space after CSV load");
  const auto values = data.truth.values();
  bool identical = loaded.observations.size() == values.size();
  for (std::size_t i = 0; identical && i < values.size(); ++i) {
    identical = loaded.observations[i].value == values[i] &&
                linearize(data.truth.shape(), loaded.observations[i].index) == i;
  }
  out.require(identical, "dense CSV values");

  const auto all = ObservationSet::from_dense(data.truth);
  const auto split = split_observations(all, uniform_sample(all.indices(), 100, 9));
  std::stringstream sparse;
  write_csv(sparse, split.train, data.space);
  const auto sparse_loaded = read_csv(sparse, data.space);
  out.require(sparse_loaded.observations.indices() == split.train.indices() &&
                  sparse_loaded.observations.values() == split.train.values(),
              "sparse CSV");

  const auto cells = all.indices();
  std::size_t models = 0;
  for (auto kind : {MethodKind::cpd, MethodKind::cpd_s, MethodKind::neural, MethodKind::gp, MethodKind::ensemble}) {
    MethodSpec spec;
    spec.name = std::string(to_string(kind));
    spec.kind = kind;
    spec.member.train.epochs = 200;
    spec.member.hidden_sizes = {8};
    if (kind == MethodKind::ensemble) {
      for (auto& m : spec.ensemble.members) m.train.epochs = 100;
      spec.ensemble.forest.tree_count = 20;
    }
    const auto trained = train_method(spec, split.train, data.space, 31);
    const auto restored = model_from_json(model_to_json(trained, data.space));
    out.require(restored.space == data.space, spec.name + " design space");
    out.require(predict(restored.method, cells) == predict(trained, cells), spec.name + " predictions differ");
    ++models;
  }
  out.detail << "dense and sparse CSV exact; " << models << " model kinds bitwise after JSON";
}

void ensemble_contract(Outcome& out) {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Eigen::MatrixXd x(60, 4);
    std::vector<double> y(60);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
      y[static_cast<std::size_t>(i)] = rng.normal(0.0, 5.0);
    }
    ForestSpec spec;
    spec.seed = seed;
    const auto forest = forest_fit(x, y, spec);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const Eigen::MatrixXd q = Eigen::MatrixXd::Random(200, 4) * 4.0;
    for (double p : forest_predict(forest, q)) {
      if (p < *lo || p > *hi) out.require(false, "forest prediction outside target range");
    }
  }
  out.require(ForestSpec{}.tree_count == 100, "ForestSpec default trees");
  out.require(EnsembleSpec{}.forest.tree_count == 100, "EnsembleSpec default trees");

  const Shape shape{5, 27, 2};
  const auto truth = low_rank_tensor(shape, 2, 0);
  const auto split = sixty_percent_split(truth, derive_seed(0, 1));
  EnsembleSpec spec;
  spec.members.clear();
  for (auto kind : {MemberKind::cpd, MemberKind::cpd, MemberKind::cpd_s}) {
    MemberSpec m;
    m.kind = kind;
    m.rank = 2;
    m.train.weight_decay = 0.0;
    spec.members.push_back(m);
  }
  const std::vector<ModeKind> kinds = {ModeKind::categorical, ModeKind::ordinal, ModeKind::categorical};
  const auto fitted = ensemble_fit(spec, split.train, kinds);
  const double train_mae = mae(split.train.values(), ensemble_predict(fitted, split.train.indices()));
  out.require(train_mae < 1e-2, "exact-recovery training MAE " + std::to_string(train_mae));
  out.detail << "forest bounded on 5 fits, 100-tree default, exact-recovery training MAE " << train_mae;
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1 gradient correctness", 30, gradient_correctness},
      {"2 exact recovery", 120, exact_recovery},
      {"3 metric oracles", 10, metric_oracles},
      {"4 sampler fidelity", 10, sampler_fidelity},
      {"5 GP sanity", 10, gp_sanity},
      {"6 bias robustness", 600, bias_robustness},
      {"7 determinism", 600, determinism},
      {"8 round trips", 120, round_trips},
      {"9 ensemble contract", 120, ensemble_contract},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.require(seconds < c.budget_seconds, "runtime over " + std::to_string(c.budget_seconds) + " s");
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.name << " (" << std::fixed
              << std::setprecision(2) << seconds << " s):" << std::defaultfloat << std::setprecision(6) << ' '
              << out.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
