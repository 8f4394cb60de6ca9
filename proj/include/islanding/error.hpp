#pragma once

#include <stdexcept>
#include <string>

namespace islanding {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (case file, scenario file, bad argument).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure of a linear or nonlinear solve.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Non-finite machine state during time integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// An index that is undefined for the given group count (IGC/DCGC with u < 2).
class UndefinedIndexError : public Error {
 public:
  using Error::Error;
};

/// DCGC requested while IGC sits below the floor.
class SaturatedIndexError : public Error {
 public:
  SaturatedIndexError(const std::string& what, double floor) : Error(what), floor_(floor) {}
  double floor() const noexcept { return floor_; }

 private:
  double floor_;
};

/// Threshold calibration impossible (no island-forming rows).
class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace islanding
