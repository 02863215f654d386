#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "microtrip/error.hpp"

namespace microtrip::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitMissingArtifact = 2;
inline constexpr int kExitNumerical = 3;

/// 1 for bad arguments, configs and digest mismatches; 2 for missing or
/// unreadable artifacts; 3 for numerical and degenerate-data failures.
int exit_code_for(ErrorCode code);

/// Runs one command. args excludes the program name. Progress goes to out;
/// failures print a single-line JSON object to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace microtrip::cli
