#pragma once

#include <stdexcept>
#include <string>

namespace shapesurv {

// Raised for problems the user can fix (bad files, bad config, bad flags).
// Everything else surfaces as std::runtime_error / std::invalid_argument and
// is treated as an internal failure by the CLI.
struct UserError : std::runtime_error {
  explicit UserError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace shapesurv
