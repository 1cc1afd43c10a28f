#pragma once

#include <stdexcept>
#include <string>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS {

// Caller-supplied input is invalid (bad flags, missing prior checkpoint,
// malformed config). The CLI maps this family to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IndexError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateMaskError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// NaN/Inf encountered in a loss, gradient or integrator state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace v2st::inline V2ST_REAL_NS
