#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fpref::cli {

// Entry point shared by main() and the tests. args[0] is the program name.
// Returns the process exit code: 0 success, 1 runtime failure, 2 usage or
// config error, 3 data error, 4 numerical error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fpref::cli
