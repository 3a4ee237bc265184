#pragma once

#include <stdexcept>
#include <string>

namespace pexsim {

// Malformed or inconsistent input data (schema, duplicates, bad ranges).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rank deficiency, singular systems, failed optimisation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system failures. The message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pexsim
