#include "latticomp/ensemble.hpp"

#include <cmath>
#include <stdexcept>

#include "latticomp/rng.hpp"

namespace latticomp {

std::string_view to_string(MemberKind kind) noexcept {
  switch (kind) {
    case MemberKind::cpd:
      return "cpd";
    case MemberKind::cpd_s:
      return "cpd_s";
    case MemberKind::neural:
      return "neural";
  }
  return "?";
}

MemberKind parse_member_kind(std::string_view text) {
  if (text == "cpd") return MemberKind::cpd;
  if (text == "cpd_s") return MemberKind::cpd_s;
  if (text == "neural") return MemberKind::neural;
  throw std::invalid_argument("unknown member kind '" + std::string(text) + "'");
}

std::string MemberSpec::label() const { return std::string(to_string(kind)) + "_r" + std::to_string(rank); }

double completion_predict(const CompletionModel& model, std::span<const std::size_t> index) {
  if (const auto* cpd = std::get_if<CpdModel>(&model)) return cpd_predict(*cpd, index);
  return neural_predict(std::get<NeuralTcModel>(model), index);
}

const Shape& completion_shape(const CompletionModel& model) {
  return std::visit([](const auto& m) -> const Shape& { return m.shape(); }, model);
}

SmoothnessSpec resolve_smoothness(const MemberSpec& spec, std::span<const ModeKind> kinds) {
  if (spec.smoothness) return *spec.smoothness;
  SmoothnessSpec s;
  for (std::size_t m = 0; m < kinds.size(); ++m) {
    if (kinds[m] == ModeKind::ordinal) s.smooth_modes.push_back(m);
  }
  if (s.smooth_modes.empty()) throw std::invalid_argument("cpd_s member needs smooth modes but the space has no ordinal mode");
  return s;
}

namespace {

// Members fit targets divided by their RMS so that the fixed learning rate and
// weight decay act on O(1) values; the scale is folded back afterwards.
double target_scale(const ObservationSet& obs) {
  double ss = 0.0;
  for (const auto& o : obs.entries()) ss += o.value * o.value;
  const double rms = std::sqrt(ss / static_cast<double>(obs.size()));
  return rms > 0.0 ? rms : 1.0;
}

ObservationSet scaled(const ObservationSet& obs, double factor) {
  std::vector<Observation> entries(obs.entries().begin(), obs.entries().end());
  for (auto& e : entries) e.value *= factor;
  return ObservationSet(obs.shape(), std::move(entries));
}

void fold_scale(CpdModel& model, double s) {
  auto params = model.parameters();
  const std::size_t n = model.shape().dim(0) * model.rank();
  for (std::size_t i = 0; i < n; ++i) params[model.mode_offset(0) + i] *= s;
}

void fold_scale(NeuralTcModel& model, double s) {
  auto params = model.parameters();
  const std::size_t last = model.layer_count() - 1;
  const std::size_t w = model.weight_offset(last);
  for (std::size_t i = 0; i < model.layer_in(last); ++i) params[w + i] *= s;
  params[model.bias_offset(last)] *= s;
}

template <typename Model>
CompletionModel fit_scaled(Model init, const ObservationSet& obs, const TrainConfig& cfg) {
  const double s = target_scale(obs);
  Model model = train(std::move(init), scaled(obs, 1.0 / s), cfg).model;
  fold_scale(model, s);
  return model;
}

}  // namespace

CompletionModel train_member(const MemberSpec& spec, const ObservationSet& train_obs, std::span<const ModeKind> kinds,
                             std::uint64_t seed) {
  if (train_obs.empty()) throw std::invalid_argument("cannot train a member on no observations");
  if (kinds.size() != train_obs.shape().order()) throw std::invalid_argument("mode kinds do not match tensor order");
  TrainConfig cfg = spec.train;
  cfg.seed = seed;
  cfg.smoothness.reset();
  switch (spec.kind) {
    case MemberKind::cpd:
      return fit_scaled(CpdModel::random(train_obs.shape(), spec.rank, seed), train_obs, cfg);
    case MemberKind::cpd_s:
      cfg.smoothness = resolve_smoothness(spec, kinds);
      return fit_scaled(CpdModel::random(train_obs.shape(), spec.rank, seed), train_obs, cfg);
    case MemberKind::neural:
      return fit_scaled(NeuralTcModel::random(train_obs.shape(), spec.rank, spec.hidden_sizes, seed), train_obs, cfg);
  }
  throw std::logic_error("unhandled member kind");
}

std::vector<MemberSpec> default_members() {
  std::vector<MemberSpec> out;
  for (std::size_t r : {1, 2, 4}) out.push_back({MemberKind::cpd, r, {}, {}, {}});
  for (std::size_t r : {1, 2, 4}) out.push_back({MemberKind::cpd_s, r, {}, {}, {}});
  for (std::size_t r : {24, 32}) out.push_back({MemberKind::neural, r, {32, 16}, {}, {}});
  return out;
}

void EnsembleSpec::validate() const {
  if (members.size() < 2) throw std::invalid_argument("ensemble needs at least two members");
  for (const auto& m : members) {
    if (m.rank == 0) throw std::invalid_argument("member rank must be at least 1");
    m.train.validate();
  }
  forest.validate();
  if (stacking_folds == 1) throw std::invalid_argument("stacking_folds must be 0 or at least 2");
}

Eigen::MatrixXd build_stack_features(std::span<const CompletionModel> members, std::span<const MultiIndex> cells) {
  if (members.empty()) throw std::invalid_argument("stack features need at least one member");
  const Shape& shape = completion_shape(members[0]);
  for (const auto& m : members) {
    if (!(completion_shape(m) == shape)) throw std::invalid_argument("ensemble members disagree on tensor shape");
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(members.size()));
  for (std::size_t j = 0; j < members.size(); ++j) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = completion_predict(members[j], cells[i]);
    }
  }
  return x;
}

namespace {

std::vector<CompletionModel> train_members(const EnsembleSpec& spec, const ObservationSet& obs,
                                           std::span<const ModeKind> kinds, std::uint64_t seed) {
  std::vector<CompletionModel> out;
  out.reserve(spec.members.size());
  for (std::size_t i = 0; i < spec.members.size(); ++i) {
    out.push_back(train_member(spec.members[i], obs, kinds, derive_seed(seed, i)));
  }
  return out;
}

// Out-of-fold member predictions: cell i lands in fold i mod k after a
// seeded shuffle, and its features come from members fit without that fold.
Eigen::MatrixXd out_of_fold_features(const EnsembleSpec& spec, const ObservationSet& obs,
                                     std::span<const ModeKind> kinds) {
  const std::size_t n = obs.size();
  const std::size_t k = spec.stacking_folds;
  if (n < k) throw std::invalid_argument("fewer observations than stacking folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, 0xf01dULL));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % k;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.members.size()));
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<Observation> fit;
    std::vector<MultiIndex> held;
    std::vector<std::size_t> held_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] == f) {
        held.push_back(obs[i].index);
        held_rows.push_back(i);
      } else {
        fit.push_back(obs[i]);
      }
    }
    const auto members = train_members(spec, ObservationSet(obs.shape(), std::move(fit)), kinds,
                                       derive_seed(spec.seed, 0xf01d0000ULL + f));
    const auto part = build_stack_features(members, held);
    for (std::size_t r = 0; r < held_rows.size(); ++r) x.row(static_cast<Eigen::Index>(held_rows[r])) = part.row(static_cast<Eigen::Index>(r));
  }
  return x;
}

}  // namespace

TrainedEnsemble ensemble_fit(const EnsembleSpec& spec, const ObservationSet& train_obs, std::span<const ModeKind> kinds) {
  spec.validate();
  if (train_obs.empty()) throw std::invalid_argument("cannot fit an ensemble on no observations");
  TrainedEnsemble out;
  out.members = train_members(spec, train_obs, kinds, spec.seed);
  const auto cells = train_obs.indices();
  const Eigen::MatrixXd features =
      spec.stacking_folds >= 2 ? out_of_fold_features(spec, train_obs, kinds) : build_stack_features(out.members, cells);
  ForestSpec forest = spec.forest;
  forest.seed = derive_seed(spec.seed, spec.members.size());
  out.forest = forest_fit(features, train_obs.values(), forest);
  return out;
}

std::vector<double> ensemble_predict(const TrainedEnsemble& ensemble, std::span<const MultiIndex> cells) {
  return forest_predict(ensemble.forest, build_stack_features(ensemble.members, cells));
}

DenseTensor ensemble_train_predict(const EnsembleSpec& spec, const ObservationSet& train_obs,
                                   std::span<const ModeKind> kinds) {
  const auto fitted = ensemble_fit(spec, train_obs, kinds);
  return DenseTensor(train_obs.shape(), ensemble_predict(fitted, all_cells(train_obs.shape())));
}

}  // namespace latticomp
