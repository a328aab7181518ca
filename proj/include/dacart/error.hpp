#pragma once

#include <stdexcept>
#include <string>

namespace dacart {

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
enum class ErrorKind { validation, degenerate, internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad user input: malformed files, schema mismatches, invalid parameters.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

// Malformed CSV content. Carries the 1-based file line and column.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ValidationError(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Numerically degenerate situations: all-zero weights, optimizer failure,
// singular systems, trees without informative splits.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what)
      : Error(ErrorKind::degenerate, what) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
      return 2;
    case ErrorKind::degenerate:
      return 3;
    case ErrorKind::internal:
      return 4;
  }
  return 4;
}

}  // namespace dacart
