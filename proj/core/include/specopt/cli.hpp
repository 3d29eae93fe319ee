#pragma once

#include <string>
#include <vector>

namespace specopt {

// Command line driver. Subcommands:
//   run <config>                 optimize from the configured initial field
//   continue <config> --from F   optimize starting from a saved field CSV
//   diagnose <field> <config>    sharp-interface diagnostics of a saved field
//   preset <name>                run a named benchmark setup end to end
// Common flags: --out DIR, --seed N, --threads N; the SPECOPT_OUT
// environment variable overrides the output directory.
// Exit codes: 0 success, 2 configuration error, 3 solver or I/O failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace specopt
