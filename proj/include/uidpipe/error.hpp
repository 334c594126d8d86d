#pragma once

#include <stdexcept>
#include <string>

namespace uidpipe {

/// Base for every error raised by the library. The three families below map
/// onto the CLI exit codes (config = 2, data = 3, convergence = 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was run before the stage that produces its inputs.
class DependencyError : public ConfigError {
 public:
  DependencyError(const std::string& stage, const std::string& missing)
      : ConfigError("stage '" + stage + "' is missing upstream artifact '" + missing + "'"),
        missing_(missing) {}
  const std::string& missing() const { return missing_; }

 private:
  std::string missing_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class StructuralError : public DataError {
 public:
  using DataError::DataError;
};

class MetadataError : public DataError {
 public:
  using DataError::DataError;
};

/// Constant column where variation is required (z-scoring, coding).
class DegenerateColumnError : public DataError {
 public:
  explicit DegenerateColumnError(const std::string& column)
      : DataError("column '" + column + "' has zero variance"), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class CodingError : public DataError {
 public:
  using DataError::DataError;
};

class CollinearityError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public DataError {
 public:
  using DataError::DataError;
};

class ComparisonError : public DataError {
 public:
  using DataError::DataError;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public ConvergenceError {
 public:
  explicit DivergenceError(int epoch)
      : ConvergenceError("loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exit code the CLI reports for an exception of this type.
int exit_code_for(const std::exception& e);

}  // namespace uidpipe
