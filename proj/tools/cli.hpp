#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cfield::cli {

// Runs one command line (args[0] is the program name). Returns the process
// exit code: 0 on success, 1 on runtime errors, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfield::cli
