#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fairbound::cli {

/// Process exit codes. Inconclusive audits and infeasible training runs get their
/// own codes so sweeps can branch on outcomes without parsing output.
enum ExitCode : int { kOk = 0, kFailure = 1, kInconclusive = 2, kInfeasible = 3 };

/// Runs the command line `args` (args[0] is the program name). Reports go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fairbound::cli
