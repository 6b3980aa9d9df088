#pragma once

#include <string>
#include <vector>

namespace vpreg {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInvalid = 2, kExitNumerical = 3 };

/// Entry point of the `vpreg` tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace vpreg
