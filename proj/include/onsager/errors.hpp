#pragma once

#include <stdexcept>
#include <string>

namespace onsager {

/// Invalid argument / configuration supplied by the caller.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Two sample points collided during Thomson relaxation.
struct DegenerateConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A semi-implicit step could not be completed (componentwise Newton failed).
struct StepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File / format problems.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace onsager
