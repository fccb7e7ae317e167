#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nf {

/// Entry point of the `nfz` tool. `args[0]` is the program name.
///
/// Subcommands: train, eval, gradcheck, oracle-check, inspect. Returns the
/// process exit status: 0 on success, 1 when a check fails or an error is
/// raised, 2 on usage errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nf
