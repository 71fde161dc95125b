#pragma once

#include <stdexcept>
#include <string>

namespace maxcover {

// Malformed instance text or invalid instance parameters. `line` is 1-based,
// 0 when the problem is not tied to a particular line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

// Invalid arguments to an operation (bad parameters, sizes out of range).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An internal guarantee that should hold by construction failed. Seeing one of
// these means a bug upstream of the throw site.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace maxcover
