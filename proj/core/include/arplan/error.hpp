#pragma once

#include <stdexcept>
#include <string>

namespace arplan {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (bad JSON, bad CSV, wrong field types).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A condition that must never happen given validated inputs.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace arplan
