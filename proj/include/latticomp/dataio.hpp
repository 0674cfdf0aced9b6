#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "latticomp/modes.hpp"
#include "latticomp/tensor.hpp"

namespace latticomp {

struct ModeInfo {
  std::string name;
  ModeKind kind = ModeKind::categorical;
  /// Level labels in index order. Ordinal labels must parse as numbers.
  std::vector<std::string> labels;

  bool operator==(const ModeInfo&) const = default;
};

struct DesignSpace {
  std::vector<ModeInfo> modes;
  /// Mode whose slices receive the biased quotas.
  std::size_t slice_mode = 0;
  /// Mode holding the measured properties, if they live on a mode.
  std::optional<std::size_t> property_mode;

  Shape shape() const;
  std::vector<ModeKind> kinds() const;
  std::size_t mode_of(const std::string& name) const;
  /// Throws std::invalid_argument on empty or duplicate labels, bad mode
  /// references, or non-numeric ordinal labels.
  void validate() const;

  bool operator==(const DesignSpace&) const = default;
};

inline const std::vector<std::string> kGeometryNames = {"Gyroid", "Schwarz", "Diamond", "Lidinoid", "Split P"};
inline const std::vector<std::string> kPropertyNames = {"E", "E_tilde"};

struct SyntheticSpec {
  /// Geometry first, property last; the middle modes are ordinal design
  /// variables whose sizes multiply to 27.
  std::vector<std::size_t> shape = {5, 27, 2};
  std::size_t latent_rank = 2;
  /// Noise standard deviation as a fraction of each property's signal std.
  double noise_std = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  DenseTensor truth;
  /// Same cells before noise.
  DenseTensor clean;
  /// Positive mass per design, over every mode except the property mode.
  std::vector<double> mass;
  DesignSpace space;
};

/// E is a positive rank-`latent_rank` CP tensor over the design modes,
/// smooth along ordinal modes; m is a positive rank-1 tensor; E_tilde = E / m.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Noiseless CP tensor of exactly the given rank with factors uniform on
/// [0.5, 1.5].
DenseTensor low_rank_tensor(const Shape& shape, std::size_t rank, std::uint64_t seed);

/// Categorical/ordinal labels for a plain shape: geometry names on mode 0
/// when it has five levels, property names on a last mode of size two,
/// numbered ordinal levels elsewhere.
DesignSpace default_design_space(const Shape& shape);

struct LoadedCsv {
  ObservationSet observations;
  DesignSpace space;
};

/// Levels are indexed by first appearance (categorical) or numeric order
/// (ordinal) unless `space` is given, in which case its labels are used.
LoadedCsv read_csv(std::istream& in, const std::optional<DesignSpace>& space = std::nullopt);
LoadedCsv load_csv(const std::filesystem::path& path, const std::optional<DesignSpace>& space = std::nullopt);

/// Rows in lexicographic index order; values carry 17 significant digits.
void write_csv(std::ostream& out, const DenseTensor& tensor, const DesignSpace& space);
void write_csv(std::ostream& out, const ObservationSet& obs, const DesignSpace& space);
void export_csv(const std::filesystem::path& path, const DenseTensor& tensor, const DesignSpace& space);
void export_csv(const std::filesystem::path& path, const ObservationSet& obs, const DesignSpace& space);

std::string design_space_to_json(const DesignSpace& space);
DesignSpace design_space_from_json(const std::string& text);
void save_design_space(const std::filesystem::path& path, const DesignSpace& space);
DesignSpace load_design_space(const std::filesystem::path& path);

}  // namespace latticomp
