#pragma once

#include <ostream>

namespace cosm::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kInput = 2, kDegenerate = 3 };

/// Entry point of the `cosm` tool. Data goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cosm::cli
