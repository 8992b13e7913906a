#pragma once

// Command-line front end. Exposed as a library so tests can drive commands
// in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace tvlearn::cli {

enum ExitCode : int { Ok = 0, Usage = 2, Solver = 3, Io = 4 };

/// Parses `args` (args[0] is the program name), runs the selected command and
/// returns its exit code. Regular output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tvlearn::cli
