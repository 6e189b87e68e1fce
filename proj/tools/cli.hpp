#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stegamark::cli {

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kRuntimeError = 2,
};

/// Runs one command line (args[0] is the program name). Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stegamark::cli
