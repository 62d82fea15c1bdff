#pragma once

// Common vocabulary types and the error hierarchy used across topospec.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace topospec {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside the domain of a field (e.g. r <= 0 for a Kepler potential,
/// or q outside the allowed region where E > V).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure did not converge or cannot proceed
/// (no sign change, step underflow, factorization failure).
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require_dimension(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace topospec
