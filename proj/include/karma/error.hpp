#pragma once

#include <stdexcept>
#include <string>

namespace karma {

// Base of every failure raised by the library. Subclasses map onto the CLI
// exit codes (see tools/karma.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or internally inconsistent GameConfig / FeeParams.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A bid that is not in allowed_bids for the bidder's karma and scheme.
class BidError : public Error {
 public:
  using Error::Error;
};

// Misuse of an engine or session API (wrong phase, wrong vector length, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

// Iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace karma
