#pragma once

#include <stdexcept>
#include <string>

namespace gasrom {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is singular or numerically rank deficient.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double condition)
      : Error(what + " (estimated condition number " + std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// A trajectory left the finite range during time integration.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time)
      : Error(what + " at t=" + std::to_string(time)), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// An iterative dense routine failed to converge, or a rank condition failed.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A least-squares regressor lost rank.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, long rank)
      : Error(what + " (numerical rank " + std::to_string(rank) + ")"), rank_(rank) {}
  long rank() const { return rank_; }

 private:
  long rank_;
};

/// A file on disk does not follow its documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A user-supplied configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gasrom
