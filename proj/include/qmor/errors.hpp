#pragma once

#include <stdexcept>
#include <string>

namespace qmor {

/// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Caller handed us something unusable: bad argument, bad config key,
/// malformed or mismatched artifact file.  CLI maps these to exit code 1.
struct InvalidArgument : Error {
  using Error::Error;
};

/// A solver failed to do its job: Newton/Gauss-Newton stagnation, rank
/// collapse, non-finite states, NNLS giving up.  CLI maps these to exit
/// code 2.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace qmor
