#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace psps {

/// Runs one `psps` invocation; `args` excludes the program name. Returns the
/// process exit code (0 ok, 1 input error, 2 infeasible, 3 solver limit,
/// 4 internal error).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psps
