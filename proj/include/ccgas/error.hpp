#pragma once

#include <stdexcept>
#include <string>

namespace ccgas {

/// Base class for all library errors. Messages are prefixed with the module
/// that raised them, e.g. "network: parallel edge (2,1)".
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what) {}
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Iterative method ran out of iterations or stalled.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Problem has no feasible point (certificate or exhausted multi-start).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class UnboundedError : public Error {
 public:
  using Error::Error;
};

/// Linearization at a point with (numerically) zero flow, or a singular
/// reduced pressure-response matrix.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccgas
