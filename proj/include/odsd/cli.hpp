#pragma once

#include <string>
#include <vector>

namespace odsd::cli {

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args);

}  // namespace odsd::cli
