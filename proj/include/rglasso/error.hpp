#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rglasso {

/// Raised when a matrix that must be positive definite is not.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(const std::string& what)
      : std::runtime_error(what) {}
};

/// A data column has zero robust spread, so it cannot be standardized.
class DegenerateColumn : public std::runtime_error {
 public:
  DegenerateColumn(std::size_t column, const std::string& what)
      : std::runtime_error(what), column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

/// An iterative routine ran out of iterations.
class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(int iterations, double residual, const std::string& what)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// Bad configuration text or command-line options.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input data (CSV parse errors and the like).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rglasso
