#include "latticomp/methods.hpp"

#include <stdexcept>

namespace latticomp {

std::string_view to_string(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::cpd:
      return "cpd";
    case MethodKind::cpd_s:
      return "cpd_s";
    case MethodKind::neural:
      return "neural";
    case MethodKind::gp:
      return "gp";
    case MethodKind::ensemble:
      return "ensemble";
  }
  return "?";
}

MethodKind parse_method_kind(std::string_view text) {
  for (auto k : {MethodKind::cpd, MethodKind::cpd_s, MethodKind::neural, MethodKind::gp, MethodKind::ensemble}) {
    if (text == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown method kind '" + std::string(text) + "'");
}

void MethodSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("method name must not be empty");
  switch (kind) {
    case MethodKind::cpd:
    case MethodKind::cpd_s:
    case MethodKind::neural:
      if (member.rank == 0) throw std::invalid_argument("method '" + name + "': rank must be at least 1");
      member.train.validate();
      break;
    case MethodKind::gp:
      gp.validate();
      break;
    case MethodKind::ensemble:
      ensemble.validate();
      break;
  }
}

Eigen::MatrixXd gp_features(std::span<const MultiIndex> cells, const Shape& shape, std::span<const ModeKind> kinds,
                            std::optional<std::size_t> property_mode) {
  const Eigen::MatrixXd full = encode_cells(cells, shape, kinds);
  if (!property_mode) return full;
  Eigen::Index begin = 0;
  for (std::size_t m = 0; m < *property_mode; ++m) {
    begin += kinds[m] == ModeKind::categorical ? static_cast<Eigen::Index>(shape.dim(m)) : 1;
  }
  const Eigen::Index width =
      kinds[*property_mode] == ModeKind::categorical ? static_cast<Eigen::Index>(shape.dim(*property_mode)) : 1;
  Eigen::MatrixXd out(full.rows(), full.cols() - width);
  out << full.leftCols(begin), full.rightCols(full.cols() - begin - width);
  return out;
}

GpSurrogate gp_surrogate_fit(const ObservationSet& train_obs, std::span<const ModeKind> kinds,
                             std::optional<std::size_t> property_mode, const GpKernelConfig& cfg) {
  if (train_obs.empty()) throw std::invalid_argument("cannot fit a GP on no observations");
  GpSurrogate out{train_obs.shape(), std::vector<ModeKind>(kinds.begin(), kinds.end()), property_mode, {}};
  if (kinds.size() != out.shape.order()) throw std::invalid_argument("mode kinds do not match tensor order");
  const std::size_t groups = property_mode ? out.shape.dim(*property_mode) : 1;
  for (std::size_t p = 0; p < groups; ++p) {
    std::vector<MultiIndex> cells;
    std::vector<double> targets;
    for (const auto& o : train_obs.entries()) {
      if (property_mode && o.index[*property_mode] != p) continue;
      cells.push_back(o.index);
      targets.push_back(o.value);
    }
    if (cells.empty()) {
      throw std::runtime_error("GP has no training cells for property level " + std::to_string(p));
    }
    out.models.push_back(gp_fit(gp_features(cells, out.shape, kinds, property_mode), targets, cfg));
  }
  return out;
}

GpPrediction gp_surrogate_predict(const GpSurrogate& gp, std::span<const MultiIndex> cells) {
  GpPrediction out;
  out.mean.resize(cells.size());
  out.variance.resize(cells.size());
  for (std::size_t p = 0; p < gp.models.size(); ++p) {
    std::vector<MultiIndex> group;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (gp.property_mode && cells[i].at(*gp.property_mode) != p) continue;
      group.push_back(cells[i]);
      rows.push_back(i);
    }
    if (group.empty()) continue;
    const auto pred = gp_predict(gp.models[p], gp_features(group, gp.shape, gp.kinds, gp.property_mode));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.mean[rows[r]] = pred.mean[r];
      out.variance[rows[r]] = pred.variance[r];
    }
  }
  return out;
}

const Shape& TrainedMethod::shape() const {
  return std::visit(
      [](const auto& m) -> const Shape& {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GpSurrogate>) {
          return m.shape;
        } else if constexpr (std::is_same_v<T, TrainedEnsemble>) {
          return completion_shape(m.members.front());
        } else {
          return m.shape();
        }
      },
      model);
}

TrainedMethod train_method(const MethodSpec& spec, const ObservationSet& train_obs, const DesignSpace& space,
                           std::uint64_t seed) {
  spec.validate();
  if (!(space.shape() == train_obs.shape())) throw std::invalid_argument("design space does not match observations");
  const auto kinds = space.kinds();
  TrainedMethod out{spec.name, spec.kind, CpdModel{}};
  switch (spec.kind) {
    case MethodKind::cpd:
    case MethodKind::cpd_s:
    case MethodKind::neural: {
      MemberSpec member = spec.member;
      member.kind = spec.kind == MethodKind::cpd     ? MemberKind::cpd
                    : spec.kind == MethodKind::cpd_s ? MemberKind::cpd_s
                                                     : MemberKind::neural;
      auto model = train_member(member, train_obs, kinds, seed);
      std::visit([&](auto&& m) { out.model = std::move(m); }, std::move(model));
      break;
    }
    case MethodKind::gp:
      out.model = gp_surrogate_fit(train_obs, kinds, space.property_mode, spec.gp);
      break;
    case MethodKind::ensemble: {
      EnsembleSpec ens = spec.ensemble;
      ens.seed = seed;
      out.model = ensemble_fit(ens, train_obs, kinds);
      break;
    }
  }
  return out;
}

std::vector<double> predict(const TrainedMethod& method, std::span<const MultiIndex> cells) {
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GpSurrogate>) {
          return gp_surrogate_predict(m, cells).mean;
        } else if constexpr (std::is_same_v<T, TrainedEnsemble>) {
          return ensemble_predict(m, cells);
        } else if constexpr (std::is_same_v<T, CpdModel>) {
          std::vector<double> out;
          out.reserve(cells.size());
          for (const auto& c : cells) out.push_back(cpd_predict(m, c));
          return out;
        } else {
          std::vector<double> out;
          out.reserve(cells.size());
          for (const auto& c : cells) out.push_back(neural_predict(m, c));
          return out;
        }
      },
      method.model);
}

DenseTensor reconstruct(const TrainedMethod& method) {
  return DenseTensor(method.shape(), predict(method, all_cells(method.shape())));
}

}  // namespace latticomp
