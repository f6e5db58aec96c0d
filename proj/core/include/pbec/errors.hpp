#pragma once

#include <stdexcept>
#include <string>

namespace pbec {

// Base of every error the library raises. The CLI maps the concrete
// subclasses onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input: violated preconditions, bad configuration, malformed files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numerical solver (root finder, integrator, Newton) failed to converge.
class SolverError : public Error {
 public:
  using Error::Error;
};

// A fit could not be performed or produced an unusable result.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace pbec
