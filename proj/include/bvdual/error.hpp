#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bvdual {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside its generator's domain.
class DomainError : public Error {
 public:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  DomainError(const std::string& what, std::size_t index = kNoIndex)
      : Error(index == kNoIndex ? what : what + " (index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Caller violated an API contract (missing tags, bad sizes, mismatched binding).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in an intermediate computation.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& stage, const std::string& what)
      : Error("numerical error in " + stage + ": " + what), stage_(stage) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Input-level validation failure; `path` names the offending field.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Raised by the toy trainers when the loss stops being finite.
class TrainingDivergence : public Error {
 public:
  explicit TrainingDivergence(std::size_t step)
      : Error("training diverged: non-finite loss at step " + std::to_string(step)), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace bvdual
