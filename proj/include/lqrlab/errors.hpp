#pragma once

#include <stdexcept>
#include <string>

namespace lqrlab {

/// Base class for every error raised by the library.
class LqrLabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch or violated precondition.
class ContractViolation : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

class BudgetExhausted : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

/// (R + BᵀMB) is numerically singular or indefinite.
class IllPosedCost : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

class NoStabilizingSolution : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

/// A closed-loop quantity was requested for a gain with ρ(A−BK) ≥ 1.
class Instability : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

class InsufficientExcitation : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

/// LSTDQ normal equations are singular.
class InsufficientData : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

/// The input-input block of a quadratic Q-function is not positive definite.
class NonExtractablePolicy : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

class ConfigError : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

/// An output file could not be opened or written.
class WriteError : public LqrLabError {
 public:
  using LqrLabError::LqrLabError;
};

#define LQRLAB_REQUIRE(cond, msg)                                      \
  do {                                                                 \
    if (!(cond)) throw ::lqrlab::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace lqrlab
