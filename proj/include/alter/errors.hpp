#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alter {

/// Root of every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or arguments; the CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A model or transport backend failed; the CLI maps these to exit code 3.
class BackendError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RaggedRowError : public ValidationError {
 public:
  RaggedRowError(std::size_t row, std::size_t expected, std::size_t got)
      : ValidationError("ragged row " + std::to_string(row) + ": expected " +
                        std::to_string(expected) + " cells, got " + std::to_string(got)),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class EmptyTableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IndexError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnknownColumnError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyColumnError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SchemaVersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingAugmentationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnprofiledTableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ManifestError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnmappableVerdictError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EngineError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ReplayMissError : public BackendError {
 public:
  ReplayMissError(std::string hash, std::string stage)
      : BackendError("replay miss for stage " + stage + " (request " + hash + ")"),
        hash_(std::move(hash)),
        stage_(std::move(stage)) {}
  const std::string& request_hash() const noexcept { return hash_; }
  const std::string& stage_label() const noexcept { return stage_; }

 private:
  std::string hash_;
  std::string stage_;
};

class BudgetExceededError : public BackendError {
 public:
  using BackendError::BackendError;
};

class DimensionMismatchError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// No sampled response carried a usable final-answer line.
class AnswerExtractionError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace alter
