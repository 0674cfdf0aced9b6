#pragma once

#include <string>

namespace latticomp {

/// Locale-independent decimal rendering with 17 significant digits, enough to
/// round-trip any double.
std::string format_double(double value);

/// Parses a full string as a double; throws std::invalid_argument otherwise.
double parse_double(const std::string& text);

}  // namespace latticomp
