#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pseudoreg {

/// Base class for every error raised by the library.
///
/// Errors fall into two families that the CLI maps onto distinct exit
/// codes: input problems (bad files, bad schemas, bad hypotheses) and
/// numerical failures (undefined estimand, nonconvergence, conditioning).
class Error : public std::runtime_error {
 public:
  enum class Family { input, numerical };

  Error(Family family, const std::string& what) : std::runtime_error(what), family_(family) {}

  Family family() const noexcept { return family_; }

 private:
  Family family_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(Family::input, "schema error: " + what) {}
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::size_t row)
      : Error(Family::input, "validation error (row " + std::to_string(row) + "): " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::string column)
      : Error(Family::input,
              "parse error (row " + std::to_string(row) + ", column '" + column + "'): " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class DesignError : public Error {
 public:
  explicit DesignError(const std::string& what) : Error(Family::input, "design error: " + what) {}
};

class HypothesisError : public Error {
 public:
  explicit HypothesisError(const std::string& what) : Error(Family::input, "hypothesis error: " + what) {}
};

class EstimandUndefinedError : public Error {
 public:
  explicit EstimandUndefinedError(const std::string& what)
      : Error(Family::numerical, "estimand undefined: " + what) {}
};

class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& what, std::vector<double> last_iterate = {})
      : Error(Family::numerical, "nonconvergence: " + what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

class LeverageError : public Error {
 public:
  explicit LeverageError(const std::string& what) : Error(Family::numerical, "leverage error: " + what) {}
};

class ConditioningError : public Error {
 public:
  explicit ConditioningError(const std::string& what)
      : Error(Family::numerical, "conditioning error: " + what) {}
};

class BootstrapUnstableError : public Error {
 public:
  explicit BootstrapUnstableError(const std::string& what)
      : Error(Family::numerical, "bootstrap unstable: " + what) {}
};

}  // namespace pseudoreg
