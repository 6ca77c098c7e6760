#ifndef AUCTIONMATCH_ERRORS_HPP
#define AUCTIONMATCH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace am {

// Base for all library errors so callers can catch am::Error at the boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent user configuration (bad key, unparsable value,
// checkpoint/config mismatch).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Demand specification that cannot be satisfied (e.g. exactly-k with m < k*n).
class InfeasibleSpecError : public Error {
 public:
  using Error::Error;
};

// Numeric failure: domain violation, non-finite value, or failed convergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Sinkhorn ran out of iterations at the final epsilon. Carries the achieved
// row-marginal violation so callers can report how close it got.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double violation)
      : NumericError(what), violation_(violation) {}
  double violation() const { return violation_; }

 private:
  double violation_;
};

// Shape mismatch between tensor operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Filesystem trouble (cannot open/write an output or checkpoint path).
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint decode failures; `kind` distinguishes the three contract errors.
class CheckpointError : public Error {
 public:
  enum class Kind { version_mismatch, truncated, shape_mismatch };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace am

#endif
