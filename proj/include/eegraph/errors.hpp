#pragma once

#include <stdexcept>
#include <string>

namespace eegraph {

// Broad error families. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  config,
  data,
  divergence,
  leakage,
  validation,
  contract,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCategory::validation, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

class LeakageError : public Error {
 public:
  explicit LeakageError(const std::string& what) : Error(ErrorCategory::leakage, what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long batch_index)
      : Error(ErrorCategory::divergence, what), batch_index_(batch_index) {}

  long batch_index() const noexcept { return batch_index_; }

 private:
  long batch_index_;
};

// Dataset loading failures carry a finer-grained kind.
enum class DataErrorKind {
  io,
  missing_file,
  size_mismatch,
  non_finite,
  bad_version,
  label_range,
  subject_range,
  malformed,
};

class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& what)
      : Error(ErrorCategory::data, what), kind_(kind) {}

  DataErrorKind kind() const noexcept { return kind_; }

 private:
  DataErrorKind kind_;
};

}  // namespace eegraph
