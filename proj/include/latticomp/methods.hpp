#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "latticomp/dataio.hpp"
#include "latticomp/ensemble.hpp"
#include "latticomp/gp.hpp"

namespace latticomp {

enum class MethodKind { cpd, cpd_s, neural, gp, ensemble };

std::string_view to_string(MethodKind kind) noexcept;
MethodKind parse_method_kind(std::string_view text);

/// One surrogate in an experiment. Only the block matching `kind` is read.
struct MethodSpec {
  /// Report label; unique within an experiment.
  std::string name = "ensemble";
  MethodKind kind = MethodKind::ensemble;
  MemberSpec member;
  GpKernelConfig gp;
  EnsembleSpec ensemble;

  void validate() const;
};

/// Independent GPs per property level when the space has a property mode,
/// each over the encoding of the remaining modes; otherwise a single GP.
struct GpSurrogate {
  Shape shape;
  std::vector<ModeKind> kinds;
  std::optional<std::size_t> property_mode;
  std::vector<GpModel> models;
};

GpSurrogate gp_surrogate_fit(const ObservationSet& train_obs, std::span<const ModeKind> kinds,
                             std::optional<std::size_t> property_mode, const GpKernelConfig& cfg);
GpPrediction gp_surrogate_predict(const GpSurrogate& gp, std::span<const MultiIndex> cells);

/// Encoded features for a GP, with the property mode's columns dropped.
Eigen::MatrixXd gp_features(std::span<const MultiIndex> cells, const Shape& shape, std::span<const ModeKind> kinds,
                            std::optional<std::size_t> property_mode);

struct TrainedMethod {
  std::string name;
  MethodKind kind = MethodKind::cpd;
  std::variant<CpdModel, NeuralTcModel, GpSurrogate, TrainedEnsemble> model;

  const Shape& shape() const;
};

/// `seed` drives every random choice of the method (initialization, member
/// seeds, forest seed); seeds inside the spec are ignored.
TrainedMethod train_method(const MethodSpec& spec, const ObservationSet& train_obs, const DesignSpace& space,
                           std::uint64_t seed);

std::vector<double> predict(const TrainedMethod& method, std::span<const MultiIndex> cells);
DenseTensor reconstruct(const TrainedMethod& method);

}  // namespace latticomp
