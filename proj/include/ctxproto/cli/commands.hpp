#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctxproto::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// Entry point of the `ctxproto` binary. `args` excludes the program name.
// Errors are reported on `err` and mapped onto the exit codes above.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxproto::cli
