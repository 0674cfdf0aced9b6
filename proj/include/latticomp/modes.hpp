#pragma once

#include <string>
#include <string_view>

namespace latticomp {

/// How a design variable's levels relate: unordered labels or an ordered scale.
enum class ModeKind { categorical, ordinal };

std::string_view to_string(ModeKind kind) noexcept;
ModeKind parse_mode_kind(std::string_view text);

}  // namespace latticomp
