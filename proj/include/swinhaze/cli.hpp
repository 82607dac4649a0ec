#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swinhaze::cli {

// Runs one subcommand. args[0] is the program name. Returns 0 on success, 2 for
// bad flags and 1 for runtime errors ("error: <Category>: message" on `err`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace swinhaze::cli
