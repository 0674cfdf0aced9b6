#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "latticomp/cpd.hpp"
#include "latticomp/forest.hpp"
#include "latticomp/modes.hpp"
#include "latticomp/neural.hpp"
#include "latticomp/tensor.hpp"
#include "latticomp/training.hpp"

namespace latticomp {

enum class MemberKind { cpd, cpd_s, neural };

std::string_view to_string(MemberKind kind) noexcept;
MemberKind parse_member_kind(std::string_view text);

struct MemberSpec {
  MemberKind kind = MemberKind::cpd;
  std::size_t rank = 2;
  /// Neural members only.
  std::vector<std::size_t> hidden_sizes = {32, 16};
  /// The seed field is ignored; members draw theirs from the ensemble seed.
  TrainConfig train;
  /// CPD-S members; when empty the ordinal modes are smoothed with weight 0.1.
  std::optional<SmoothnessSpec> smoothness;

  std::string label() const;
};

using CompletionModel = std::variant<CpdModel, NeuralTcModel>;

double completion_predict(const CompletionModel& model, std::span<const std::size_t> index);
const Shape& completion_shape(const CompletionModel& model);

/// Smoothness used by a CPD-S member over a space with the given mode kinds.
SmoothnessSpec resolve_smoothness(const MemberSpec& spec, std::span<const ModeKind> kinds);

CompletionModel train_member(const MemberSpec& spec, const ObservationSet& train_obs, std::span<const ModeKind> kinds,
                             std::uint64_t seed);

/// CPD ranks 1, 2, 4; CPD-S ranks 1, 2, 4; neural ranks 24, 32.
std::vector<MemberSpec> default_members();

struct EnsembleSpec {
  std::vector<MemberSpec> members = default_members();
  ForestSpec forest;
  std::uint64_t seed = 0;
  /// 0 trains the forest on in-sample member predictions. k >= 2 uses
  /// out-of-fold predictions from k member refits instead.
  std::size_t stacking_folds = 0;

  void validate() const;
};

/// Row per cell, column per member.
Eigen::MatrixXd build_stack_features(std::span<const CompletionModel> members, std::span<const MultiIndex> cells);

struct TrainedEnsemble {
  std::vector<CompletionModel> members;
  Forest forest;
};

/// Member i trains with seed derive_seed(spec.seed, i); the forest uses
/// derive_seed(spec.seed, member count).
TrainedEnsemble ensemble_fit(const EnsembleSpec& spec, const ObservationSet& train_obs, std::span<const ModeKind> kinds);
std::vector<double> ensemble_predict(const TrainedEnsemble& ensemble, std::span<const MultiIndex> cells);

/// Fits on `train_obs` and predicts every cell of its shape.
DenseTensor ensemble_train_predict(const EnsembleSpec& spec, const ObservationSet& train_obs,
                                   std::span<const ModeKind> kinds);

}  // namespace latticomp
