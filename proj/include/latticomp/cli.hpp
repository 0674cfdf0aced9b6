#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latticomp {

inline constexpr int kConfigSchemaVersion = 1;

/// Exit codes: 0 success, 1 runtime failure, 2 usage or config schema error.
/// `args` excludes the program name. Files written before a failure are
/// removed.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latticomp
