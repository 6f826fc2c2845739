#pragma once

#include <stdexcept>
#include <string>

namespace crea {

// Base type for every failure the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: files, configs, call preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Wire-level failure talking to a backend (after retries).
class BackendError : public Error {
 public:
  using Error::Error;
};

// A run stopped because the per-example error quota was exceeded.
class RunAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace crea
