#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mxd::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNumericalFailure = 1;
inline constexpr int kUsage = 2;

/// Runs the command line in-process; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mxd::cli
