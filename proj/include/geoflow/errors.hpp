#pragma once

#include <stdexcept>
#include <string>

namespace geoflow {

/// Input violates an operation's contract (bad shape, out-of-range value,
/// unknown frame id, missing file). Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation produced non-finite values or diverged. The message carries
/// diagnostics (step index, tensor name, offending value). Maps to exit code 1.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace geoflow
