#pragma once

#include <stdexcept>
#include <string>

namespace jclt {

// Invalid caller-supplied parameter (n, beta, kappa, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// z outside (-2, 2) \ {0}, or an index outside the regime an operation needs.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DiagnosticUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jclt
