#pragma once

#include <stdexcept>
#include <string>

namespace haarweight {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or cube lies outside the root cube [0,1)^d.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is out of range (p <= 1, negative level, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A matrix is not symmetric or not positive definite.
class MatrixDomainError : public Error {
 public:
  using Error::Error;
};

/// Grid, dimension or component counts do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A Haar multiplier has no symbol for a cube carrying a coefficient.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Ellipsoid fitting did not reach its tolerance within the iteration cap.
class FitError : public Error {
 public:
  FitError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Threshold calibration left its admissible bracket.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration or data file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace haarweight
