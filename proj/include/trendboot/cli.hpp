#pragma once

#include <string>
#include <vector>

namespace trendboot::cli {

/// Runs one subcommand. Returns 0 on success, 2 on invalid input or
/// parameters, 3 on numerical failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args); // args[0] is the program name

} // namespace trendboot::cli
