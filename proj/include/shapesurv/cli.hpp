#pragma once

#include <vector>
#include <string>

namespace shapesurv {

// Entry point behind the command-line binary; returns the process exit code
// (0 success, 1 user error, 2 internal error). Results go to stdout, logs
// and errors to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace shapesurv
