#include <string>
#include <vector>

#include "qdsim/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qdsim::cli::run(args);
}
