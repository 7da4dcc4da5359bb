#pragma once

#include <stdexcept>
#include <string>

namespace graduate {

// Input outside an operation's mathematical domain (negative rate, q >= 1, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent data: missing columns, zero deaths where a log is
// needed, mismatched lengths, missing exposures.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Sampler or linear-algebra breakdown (non-finite likelihood, lost positive
// definiteness, degenerate importance weights).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (burn-in >= iterations, bad weights, ...).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace graduate
