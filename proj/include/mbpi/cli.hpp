#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mbpi::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitCheckFailed = 3;

/// Runs one subcommand; args excludes the program name. The JSON result
/// document goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace mbpi::cli
