#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace faircrop {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bytes were read but do not form a valid file of the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

struct ValidationIssue {
  std::size_t line = 0;  // 1-based; 0 when not tied to a line
  std::string message;
};

// Collects every problem found in one pass rather than stopping at the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string out = std::to_string(issues.size()) + " validation error(s)";
    for (const auto& issue : issues) {
      out += "\n  ";
      if (issue.line != 0) out += "line " + std::to_string(issue.line) + ": ";
      out += issue.message;
    }
    return out;
  }

  std::vector<ValidationIssue> issues_;
};

}  // namespace faircrop
