#pragma once

#include <filesystem>
#include <string>

#include "latticomp/dataio.hpp"
#include "latticomp/methods.hpp"

namespace latticomp {

inline constexpr int kModelSchemaVersion = 1;

struct SavedModel {
  TrainedMethod method;
  DesignSpace space;
};

/// Self-contained JSON: parameters are written with round-trip precision and
/// GP models keep their training data, so a reloaded model predicts
/// bit-for-bit like the original.
std::string model_to_json(const TrainedMethod& method, const DesignSpace& space);
SavedModel model_from_json(const std::string& text);

void save_model(const std::filesystem::path& path, const TrainedMethod& method, const DesignSpace& space);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace latticomp
