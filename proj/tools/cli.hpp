#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace critpoint::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitValidationFailed = 4;

// args excludes the program name. Reports go to out (or --output), diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "a:b:step" or "start:stop:count:lin|log".
std::vector<double> parse_grid(const std::string& spec);

}  // namespace critpoint::cli
