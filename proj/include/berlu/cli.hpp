#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace berlu::cli {

/// Runs the command line `args` (without the program name). Data goes to
/// `out` (or the --out file), diagnostics to `err`. Returns the exit code:
/// 0 on success, 1 on a runtime error, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace berlu::cli
