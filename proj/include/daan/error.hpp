// Exception types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace daan {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent schema file. `line()` is 1-based, 0 when the
/// error is not tied to a single line.
class SchemaError : public Error {
 public:
  SchemaError(int line, const std::string& what)
      : Error(line > 0 ? "schema line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A label vector sets zero or several bits inside one mutually exclusive group.
class MutualExclusionViolation : public Error {
 public:
  explicit MutualExclusionViolation(std::string group)
      : Error("mutual exclusion violated in group '" + group + "'"), group_(std::move(group)) {}
  const std::string& group() const noexcept { return group_; }

 private:
  std::string group_;
};

/// Manifest, vote-file or config parse failure. `row()` is 1-based (header = 1).
class FormatError : public Error {
 public:
  FormatError(const std::string& file, int row, const std::string& what)
      : Error(file + (row > 0 ? ":" + std::to_string(row) : std::string()) + ": " + what),
        row_(row) {}
  int row() const noexcept { return row_; }

 private:
  int row_;
};

/// Tensor shape or dimension contract broken.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A training loss became NaN or infinite.
class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::string term)
      : Error("non-finite value in loss term " + term), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace daan
