#pragma once

#include <string>
#include <vector>

namespace qdsim::cli {

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 success, 1 usage, 2 model/parse error, 3 numeric failure.
int run(const std::vector<std::string>& argv);

}  // namespace qdsim::cli
