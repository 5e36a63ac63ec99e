#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace touchgen::cli {

// Runs one `touchgen` invocation; args excludes the program name. Returns the
// process exit code. Every subcommand writes <out>/config_echo.json, and
// passing that file back via --config reproduces the run.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace touchgen::cli
