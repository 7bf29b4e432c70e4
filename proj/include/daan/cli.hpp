// Command-line front end: synth, train, eval, cam and votes.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace daan {

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "DAAN_OUT_ROOT";

/// Runs one command. `args` excludes the program name. Returns the exit code;
/// errors and usage text go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace daan
