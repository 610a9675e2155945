#include <string>
#include <vector>

#include "odsd/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return odsd::cli::run(args);
}
