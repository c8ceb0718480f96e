#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flowrank::cli {

// Entry point of the `flowrank` tool. `args` excludes the program name.
// Returns 0 on success, 1 on domain errors and 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowrank::cli
