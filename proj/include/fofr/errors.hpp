#pragma once

#include <stdexcept>
#include <string>

namespace fofr {

/// Input violates a data contract: malformed files, mixed grids, bad shapes.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Two operands live on different grids.
class GridMismatchError : public DataError {
 public:
  explicit GridMismatchError(const std::string& what) : DataError(what) {}
};

/// A computation cannot proceed for numerical reasons, e.g. a truncation
/// request past the usable rank of the covariance spectrum.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fofr
