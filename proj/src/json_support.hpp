#pragma once

#include <json.hpp>

#include "latticomp/dataio.hpp"

namespace latticomp::detail {

nlohmann::json design_space_json(const DesignSpace& space);
DesignSpace design_space_from_json(const nlohmann::json& doc);

}  // namespace latticomp::detail
