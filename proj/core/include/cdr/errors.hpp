#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdr {

// Exit-code classes used by the command-line front end:
//   ConfigError -> 2, DataError -> 3, NumericalError -> 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(row ? what + " (row " + std::to_string(*row) + ")" : what), row_(row) {}

  // 1-based data row (header excluded) when the error is tied to one row.
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  std::optional<std::size_t> row_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateCorrelationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InfeasibleProbabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateMarginalError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class WeakInstrumentError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonconvergenceError : public NumericalError {
 public:
  NonconvergenceError(const std::string& what, std::vector<double> residuals)
      : NumericalError(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptySelectionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BadStartError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Raised by the estimator when step 1 or step 2 fails; carries the grid cell.
class FitError : public NumericalError {
 public:
  FitError(const std::string& what, std::string cell)
      : NumericalError(what + " at " + cell), cell_(std::move(cell)) {}
  const std::string& cell() const noexcept { return cell_; }

 private:
  std::string cell_;
};

class SingularHessianError : public NumericalError {
 public:
  SingularHessianError(const std::string& block, std::string cell)
      : NumericalError("singular Hessian block " + block + " at " + cell), cell_(std::move(cell)) {}
  const std::string& cell() const noexcept { return cell_; }

 private:
  std::string cell_;
};

class DegenerateCellError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EmptyStratumError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OffGridError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InvalidDgpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cdr
