#pragma once

#include <stdexcept>
#include <string>

namespace magceptor {

// Raised for invalid inputs to the physics and design routines.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An evaluation point coincides with a dipole, or two dipoles coincide.
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Malformed config, program, or campaign text.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace magceptor
