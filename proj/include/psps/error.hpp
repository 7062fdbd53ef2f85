#pragma once

#include <stdexcept>
#include <string>

namespace psps {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: unknown ids, out-of-range parameters, malformed files.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0)
      : InputError(line > 0 ? what + " (line " + std::to_string(line) +
                                  ", column " + std::to_string(column) + ")"
                            : what),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Input that parses but violates a data invariant (negative risk, X <= 0).
class DataError : public InputError {
 public:
  using InputError::InputError;
};

/// JSON document that does not follow the expected schema.
class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

/// The environment cannot run what was asked (missing external solver, I/O).
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

/// An external solver exited abnormally or wrote an unreadable solution.
class ExternalSolverError : public Error {
 public:
  using Error::Error;
};

/// A solution claimed optimal failed the independent feasibility audit.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// An internal contract was broken (e.g. a sweep whose feasibility region
/// is not monotone); indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace psps
