#pragma once

#include <stdexcept>
#include <string>

namespace hmae {

/// Bad input: malformed files, violated preconditions, mismatched artifacts.
/// The CLI maps this to exit code 1; anything else escaping is exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema violation while reading a JSONL file; carries the 1-based line.
class DatasetError : public ValidationError {
 public:
  DatasetError(std::size_t line, const std::string& field, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": field '" + field + "': " + what),
        line_(line),
        field_(field) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace hmae
