// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vidpost {

/// Root of the library error hierarchy.
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (bad dims, nonpositive sigma, ...).
class ConfigError : public Error {
  using Error::Error;
};

/// Non-finite values or other numerical breakdown.
class NumericError : public Error {
  using Error::Error;
};

/// A hard constraint was violated (quota budget, infeasible group, ...).
class ConstraintError : public Error {
  using Error::Error;
};

/// File or stream failure.
class IoError : public Error {
  using Error::Error;
};

}  // namespace vidpost
