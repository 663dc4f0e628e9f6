#pragma once

namespace fracq::cli {

// Entry point of the `fracq` command-line tool, separated from main() so the
// subcommands are testable in-process. Returns the process exit code:
// 0 success, 1 runtime failure (JSON diagnostics on stderr), 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace fracq::cli
