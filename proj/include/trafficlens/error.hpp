#pragma once

#include <stdexcept>
#include <string>

namespace trafficlens {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition or invariant.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (XML, JSON, CSV) that cannot be recovered.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Failure of a simulation backend (external process, missing binary, ...).
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int exit_code = -1, std::string output = {})
      : Error(what), exit_code_(exit_code), output_(std::move(output)) {}

  int exit_code() const noexcept { return exit_code_; }
  const std::string& output() const noexcept { return output_; }

 private:
  int exit_code_;
  std::string output_;
};

class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace trafficlens
