#pragma once

#include <string>
#include <vector>

namespace vidcascade {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitInfeasible = 3, kExitRuntime = 4 };

/// Entry point of the `vidcascade` command-line tool. Returns the process
/// exit code; diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);

/// Expands `--manifest PATH` into flag tokens placed right after the
/// subcommand name, so that flags given explicitly on the command line
/// (which come later) take precedence. Exposed for tests.
std::vector<std::string> expand_manifest(const std::vector<std::string>& args);

}  // namespace vidcascade
