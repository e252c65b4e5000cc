#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posenc::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 1, kRuntime = 2 };

// Entry point behind the `posenc` tool. `args` excludes the program name.
// Subcommands: gen, train, sweep, analyze.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace posenc::cli
