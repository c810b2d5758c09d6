#pragma once

#include <stdexcept>
#include <string>

namespace fdl {

// Evaluation outside an open conjugate domain, or a critic output that left it.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation is not defined for the requested divergence (e.g. f''(1) for TV).
class UnsupportedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A closed form whose defining integral diverges (chi^2 with 2 var_Q <= var_P).
class DivergenceUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training or estimation produced a non-finite value or tripped a guard.
class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fdl

namespace fdl {

// The chi^2 loss exponent crossed its overflow guard.
class LossExplosion : public TrainingFailure {
 public:
  using TrainingFailure::TrainingFailure;
};

}  // namespace fdl
