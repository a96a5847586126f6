#pragma once

#include <stdexcept>
#include <string>

namespace spintest {

// Caller broke a documented precondition (bad dimension, p outside [0,1], ...).
class contract_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid declarative input: fault spec, config file, or generation request.
class spec_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File or format problem while loading/saving artifacts.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: diverged training, degenerate calibration.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spintest
