#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jssl {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_io = 3, exit_numerical = 4 };

/// Runs one invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jssl
