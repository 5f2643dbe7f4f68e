#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace chaintrust::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitEvaluation = 1;
inline constexpr int kExitConfig = 2;

/// Runs one command line (without the program name). Normal output goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chaintrust::cli
