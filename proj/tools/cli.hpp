#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace regmatch::cli {

enum ExitCode : int { ok = 0, usage_error = 1, not_converged = 2, infeasible = 3 };

/// Parses the arguments (argv[0] included), runs one subcommand and returns its exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace regmatch::cli
