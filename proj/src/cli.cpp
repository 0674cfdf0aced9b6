#include "latticomp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json_support.hpp"
#include "latticomp/dataio.hpp"
#include "latticomp/experiment.hpp"
#include "latticomp/hash.hpp"
#include "latticomp/metrics.hpp"
#include "latticomp/serialize.hpp"

namespace latticomp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad config content; reported with exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Reads one JSON object, remembering which keys were consumed so leftovers
/// can be rejected as unknown.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required field '" + key + "'");
    return j_.at(key);
  }

  template <typename T>
  T required(const std::string& key) {
    return convert<T>(key, raw(key));
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    return j_.contains(key) ? convert<T>(key, j_.at(key)) : fallback;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  template <typename T>
  T convert(const std::string& key, const json& v) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + ": field '" + key + "' has the wrong type");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

struct Options {
  std::string config;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool quiet = false;
};

json read_json_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(file);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

void check_version(Fields& f) {
  const int v = f.required<int>("schema_version");
  if (v != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(v) + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
}

// --- config sections --------------------------------------------------------

SyntheticSpec parse_synthetic(const json& j) {
  Fields f(j, "synthetic");
  SyntheticSpec s;
  s.shape = f.get("shape", s.shape);
  s.latent_rank = f.get("latent_rank", s.latent_rank);
  s.noise_std = f.get("noise_std", s.noise_std);
  s.seed = f.get("seed", s.seed);
  f.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synthetic: ") + e.what());
  }
  return s;
}

TrainConfig parse_train(const json& j, const std::string& where) {
  Fields f(j, where);
  TrainConfig c;
  c.learning_rate = f.get("learning_rate", c.learning_rate);
  c.weight_decay = f.get("weight_decay", c.weight_decay);
  c.epochs = f.get("epochs", c.epochs);
  c.adam_beta1 = f.get("adam_beta1", c.adam_beta1);
  c.adam_beta2 = f.get("adam_beta2", c.adam_beta2);
  c.adam_epsilon = f.get("adam_epsilon", c.adam_epsilon);
  c.early_stopping = f.get("early_stopping", c.early_stopping);
  c.plateau_window = f.get("plateau_window", c.plateau_window);
  c.plateau_tolerance = f.get("plateau_tolerance", c.plateau_tolerance);
  f.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

SmoothnessSpec parse_smoothness(const json& j, const std::string& where) {
  Fields f(j, where);
  SmoothnessSpec s;
  s.smooth_modes = f.required<std::vector<std::size_t>>("modes");
  s.weight = f.get("weight", s.weight);
  f.finish();
  return s;
}

void parse_member_fields(Fields& f, MemberSpec& m) {
  m.rank = f.get("rank", m.rank);
  m.hidden_sizes = f.get("hidden_sizes", m.hidden_sizes);
  if (f.has("train")) m.train = parse_train(f.raw("train"), f.where() + ".train");
  if (f.has("smoothness")) m.smoothness = parse_smoothness(f.raw("smoothness"), f.where() + ".smoothness");
}

MemberSpec parse_member(const json& j, const std::string& where) {
  Fields f(j, where);
  MemberSpec m;
  try {
    m.kind = parse_member_kind(f.required<std::string>("kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  parse_member_fields(f, m);
  f.finish();
  return m;
}

ForestSpec parse_forest(const json& j) {
  Fields f(j, "forest");
  ForestSpec s;
  s.tree_count = f.get("tree_count", s.tree_count);
  if (f.has("max_depth") && !f.raw("max_depth").is_null()) s.max_depth = f.required<std::size_t>("max_depth");
  s.min_samples_leaf = f.get("min_samples_leaf", s.min_samples_leaf);
  s.feature_subsample = f.get("feature_subsample", s.feature_subsample);
  s.bootstrap = f.get("bootstrap", s.bootstrap);
  f.finish();
  return s;
}

GpKernelConfig parse_kernel(const json& j) {
  Fields f(j, "kernel");
  GpKernelConfig c;
  c.constant_value = f.get("constant_value", c.constant_value);
  c.rbf_lengthscale = f.get("rbf_lengthscale", c.rbf_lengthscale);
  c.white_noise = f.get("white_noise", c.white_noise);
  c.alpha = f.get("alpha", c.alpha);
  c.optimize_hyperparams = f.get("optimize_hyperparams", c.optimize_hyperparams);
  f.finish();
  return c;
}

void check_method_name(const std::string& name) {
  const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
  if (!ok) throw ConfigError("method name '" + name + "' may only use letters, digits, '_', '-' and '.'");
}

/// A method is either a kind name (all defaults) or an object.
MethodSpec parse_method(const json& j) {
  MethodSpec spec;
  const auto set_kind = [&](const std::string& kind) {
    try {
      spec.kind = parse_method_kind(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    spec.name = kind;
  };
  if (j.is_string()) {
    set_kind(j.get<std::string>());
    return spec;
  }
  Fields f(j, "method");
  set_kind(f.required<std::string>("kind"));
  spec.name = f.get("name", spec.name);
  check_method_name(spec.name);
  switch (spec.kind) {
    case MethodKind::cpd:
    case MethodKind::cpd_s:
    case MethodKind::neural:
      parse_member_fields(f, spec.member);
      break;
    case MethodKind::gp:
      if (f.has("kernel")) spec.gp = parse_kernel(f.raw("kernel"));
      break;
    case MethodKind::ensemble:
      if (f.has("members")) {
        spec.ensemble.members.clear();
        const json& members = f.raw("members");
        if (!members.is_array()) throw ConfigError("method '" + spec.name + "': members must be an array");
        for (std::size_t i = 0; i < members.size(); ++i) {
          spec.ensemble.members.push_back(parse_member(members[i], "members[" + std::to_string(i) + "]"));
        }
      }
      if (f.has("forest")) spec.ensemble.forest = parse_forest(f.raw("forest"));
      spec.ensemble.stacking_folds = f.get("stacking_folds", spec.ensemble.stacking_folds);
      break;
  }
  f.finish();
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("method '" + spec.name + "': " + e.what());
  }
  return spec;
}

std::vector<MethodSpec> parse_methods(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("methods must be a non-empty array");
  std::vector<MethodSpec> out;
  std::set<std::string> names;
  for (const auto& m : j) {
    out.push_back(parse_method(m));
    if (!names.insert(out.back().name).second) throw ConfigError("duplicate method name '" + out.back().name + "'");
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

/// Either {"synthetic": {...}} or {"csv": path, "design_space": path?}.
struct DatasetSource {
  std::optional<SyntheticSpec> synthetic;
  fs::path csv;
  std::optional<fs::path> design_space;
};

DatasetSource parse_dataset(const json& j, const fs::path& base) {
  Fields f(j, "dataset");
  DatasetSource src;
  if (f.has("synthetic") == f.has("csv")) throw ConfigError("dataset needs exactly one of 'synthetic' or 'csv'");
  if (f.has("synthetic")) {
    src.synthetic = parse_synthetic(f.raw("synthetic"));
  } else {
    src.csv = resolve(base, f.required<std::string>("csv"));
    if (f.has("design_space")) src.design_space = resolve(base, f.required<std::string>("design_space"));
  }
  f.finish();
  return src;
}

Dataset load_dataset(const DatasetSource& src, std::optional<std::uint64_t> seed_override) {
  if (src.synthetic) {
    SyntheticSpec spec = *src.synthetic;
    if (seed_override) spec.seed = *seed_override;
    return dataset_from(generate_synthetic(spec));
  }
  std::optional<DesignSpace> space;
  if (src.design_space) space = load_design_space(*src.design_space);
  auto loaded = load_csv(src.csv, space);
  return {std::move(loaded.observations), std::move(loaded.space)};
}

// --- output bookkeeping -----------------------------------------------------

/// Collects outputs in memory and writes them only once the command has
/// succeeded; a failed write removes whatever was already written.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.first);
    return out;
  }

  void commit() {
    std::vector<fs::path> written;
    try {
      fs::create_directories(dir_);
      for (const auto& [name, content] : files_) {
        const fs::path path = dir_ / name;
        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
        written.push_back(path);
        file << content;
        if (!file.flush()) throw std::runtime_error("failed writing " + path.string());
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

void add_manifest(Outputs& outputs, const std::string& command, const json& config, std::uint64_t seed) {
  auto files = outputs.names();
  std::sort(files.begin(), files.end());
  const json manifest = {{"schema_version", kConfigSchemaVersion},
                         {"command", command},
                         {"config_hash", "fnv1a64:" + hex64(fnv1a64(config.dump()))},
                         {"seed", seed},
                         {"files", files}};
  outputs.add("run_manifest.json", manifest.dump(2) + "\n");
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

std::string shape_text(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.order(); ++i) s += (i ? ", " : "") + std::to_string(shape.dim(i));
  return s + "]";
}

// --- commands ---------------------------------------------------------------

struct Context {
  Options opts;
  json config;
  fs::path base;
  std::ostream& out;
  bool quiet() const { return opts.quiet; }
};

void cmd_generate(Context& ctx, Outputs& outputs) {
  SyntheticSpec spec;
  if (!ctx.config.is_null()) {
    Fields f(ctx.config, "config");
    check_version(f);
    if (f.has("synthetic")) spec = parse_synthetic(f.raw("synthetic"));
    f.finish();
  }
  if (ctx.opts.seed) spec.seed = *ctx.opts.seed;
  const auto data = generate_synthetic(spec);
  outputs.add("ground_truth.csv", render([&](std::ostream& s) { write_csv(s, data.truth, data.space); }));
  outputs.add("design_space.json", design_space_to_json(data.space));
  add_manifest(outputs, "generate", ctx.config, spec.seed);
  if (!ctx.quiet()) ctx.out << "cells: " << data.truth.size() << "\n";
}

struct SweepSetup {
  DatasetSource dataset;
  SweepConfig sweep;
};

SweepSetup parse_sweep_common(Fields& f, const Context& ctx) {
  check_version(f);
  SweepSetup s;
  s.dataset = parse_dataset(f.raw("dataset"), ctx.base);
  s.sweep.methods = parse_methods(f.raw("methods"));
  s.sweep.iterations = f.get("iterations", s.sweep.iterations);
  s.sweep.base_seed = f.get("base_seed", s.sweep.base_seed);
  s.sweep.record_timing = f.get("record_timing", s.sweep.record_timing);
  if (s.sweep.iterations == 0) throw ConfigError("iterations must be at least 1");
  if (ctx.opts.seed) s.sweep.base_seed = *ctx.opts.seed;
  s.sweep.jobs = ctx.opts.jobs;
  return s;
}

void add_sweep_tables(Outputs& outputs, const SweepResult& result, const Dataset& data) {
  outputs.add("trials.csv", render([&](std::ostream& s) { write_trials_csv(s, result.trials); }));
  outputs.add("aggregated.csv", render([&](std::ostream& s) { write_aggregated_csv(s, result.reports); }));
  if (data.space.property_mode) {
    const auto& labels = data.space.modes[*data.space.property_mode].labels;
    outputs.add("trials_by_property.csv",
                render([&](std::ostream& s) { write_trials_by_property_csv(s, result.trials, labels); }));
  }
}

void print_reports(std::ostream& out, const std::vector<ExperimentReport>& reports, const std::string& key) {
  out << std::left << std::setw(16) << "method" << std::setw(10) << key << "mean_r2   std_r2    mean_mae\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(16) << r.method << std::setw(10) << r.group_key << std::fixed
        << std::setprecision(4) << std::setw(10) << r.mean_r2 << std::setw(10) << r.std_r2 << r.mean_mae << "\n";
    out.unsetf(std::ios::fixed);
  }
}

void cmd_uniform(Context& ctx, Outputs& outputs) {
  Fields f(ctx.config, "config");
  auto setup = parse_sweep_common(f, ctx);
  const auto sizes = f.required<std::vector<std::size_t>>("train_sizes");
  f.finish();
  if (sizes.empty()) throw ConfigError("train_sizes must not be empty");
  const auto data = load_dataset(setup.dataset, ctx.opts.seed);
  const auto result = run_uniform_sweep(data, setup.sweep, sizes);
  add_sweep_tables(outputs, result, data);
  for (const auto& p : result.parity) {
    outputs.add("parity_" + p.method + ".csv", render([&](std::ostream& s) { write_parity_csv(s, p, false); }));
    outputs.add("parity_" + p.method + "_normalized.csv",
                render([&](std::ostream& s) { write_parity_csv(s, p, true); }));
    const auto plot = parity_data(p.actual_normalized, p.predicted_normalized, p.labels);
    outputs.add("parity_" + p.method + ".svg", parity_svg(plot, p.method + " (standardized per property)"));
  }
  add_manifest(outputs, "uniform", ctx.config, setup.sweep.base_seed);
  if (!ctx.quiet()) print_reports(ctx.out, result.reports, "size");
}

void cmd_bias(Context& ctx, Outputs& outputs) {
  Fields f(ctx.config, "config");
  auto setup = parse_sweep_common(f, ctx);
  std::vector<int> experiments = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  experiments = f.get("experiments", experiments);
  const bool fix_quotas = f.get("fix_quotas", false);
  f.finish();
  if (experiments.empty()) throw ConfigError("experiments must not be empty");
  for (int e : experiments) {
    if (e < kMinExperiment || e > kMaxExperiment) throw ConfigError("experiment numbers must be in 1..10");
  }
  const auto data = load_dataset(setup.dataset, ctx.opts.seed);
  const auto result = run_bias_sweep(data, setup.sweep, experiments, fix_quotas);
  const auto& slice_labels = data.space.modes[data.space.slice_mode].labels;
  outputs.add("quotas.csv", render([&](std::ostream& s) { write_quota_table(s, slice_labels, result.quotas); }));
  add_sweep_tables(outputs, result, data);
  add_manifest(outputs, "bias", ctx.config, setup.sweep.base_seed);
  if (!ctx.quiet()) print_reports(ctx.out, result.reports, "e_num");
}

void cmd_train(Context& ctx, Outputs& outputs) {
  Fields f(ctx.config, "config");
  check_version(f);
  const auto csv = resolve(ctx.base, f.required<std::string>("train_csv"));
  std::optional<fs::path> space_path;
  if (f.has("design_space")) space_path = resolve(ctx.base, f.required<std::string>("design_space"));
  const auto method = parse_method(f.raw("method"));
  std::uint64_t seed = f.get("seed", std::uint64_t{0});
  f.finish();
  if (ctx.opts.seed) seed = *ctx.opts.seed;

  std::optional<DesignSpace> space;
  if (space_path) space = load_design_space(*space_path);
  const auto loaded = load_csv(csv, space);
  const auto trained = train_method(method, loaded.observations, loaded.space, seed);
  outputs.add("model.json", model_to_json(trained, loaded.space));
  add_manifest(outputs, "train", ctx.config, seed);
  if (!ctx.quiet()) {
    ctx.out << "trained " << method.name << " on " << loaded.observations.size() << " cells, shape "
            << shape_text(loaded.observations.shape()) << "\n";
  }
}

void cmd_predict(Context& ctx, Outputs& outputs) {
  Fields f(ctx.config, "config");
  check_version(f);
  const auto model_path = resolve(ctx.base, f.required<std::string>("model"));
  std::optional<fs::path> space_path;
  if (f.has("design_space")) space_path = resolve(ctx.base, f.required<std::string>("design_space"));
  f.finish();

  const auto saved = load_model(model_path);
  if (space_path) {
    const auto space = load_design_space(*space_path);
    if (!(space.shape() == saved.method.shape())) {
      throw std::runtime_error("model expects shape " + shape_text(saved.method.shape()) +
                               " but the design space has shape " + shape_text(space.shape()));
    }
  }
  const auto full = reconstruct(saved.method);
  outputs.add("predictions.csv", render([&](std::ostream& s) { write_csv(s, full, saved.space); }));
  add_manifest(outputs, "predict", ctx.config, 0);
  if (!ctx.quiet()) ctx.out << "predicted " << full.size() << " cells\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Tensor-completion surrogates for combinatorial design spaces", "latticomp");
  app.require_subcommand(1);
  Options opts;
  std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "write a synthetic ground-truth dataset"},
      {"uniform", "uniform-sampling train-size sweep"},
      {"bias", "biased-sampling sweep over experiment numbers"},
      {"train", "train one method on a training CSV and save it"},
      {"predict", "predict every cell with a saved model"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory (LATTICOMP_OUT overrides)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", opts.quiet, "suppress summaries");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  if (sub->count("--seed")) opts.seed = seed;
  if (const char* env = std::getenv("LATTICOMP_OUT"); env && *env) opts.out_dir = env;
  if (command != "generate" && opts.config.empty()) {
    err << "error: " << command << " requires --config\n";
    return 2;
  }

  Context ctx{opts, nullptr, fs::current_path(), out};
  Outputs outputs(opts.out_dir);
  try {
    if (!opts.config.empty()) {
      ctx.config = read_json_file(opts.config);
      ctx.base = fs::absolute(opts.config).parent_path();
    }
    if (command == "generate") cmd_generate(ctx, outputs);
    if (command == "uniform") cmd_uniform(ctx, outputs);
    if (command == "bias") cmd_bias(ctx, outputs);
    if (command == "train") cmd_train(ctx, outputs);
    if (command == "predict") cmd_predict(ctx, outputs);
    outputs.commit();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace latticomp
