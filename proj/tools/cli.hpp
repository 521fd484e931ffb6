#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fpfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;

/// Runs one command line (args[0] is the program name). Results go to `out`,
/// diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpfuse::cli
