#pragma once

#include <stdexcept>
#include <string>

namespace roughmag {

// Base class for everything that should map to the CLI's "numerical error"
// exit code. Config/usage problems derive from ConfigError instead.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Drift matrix has an eigenvalue with non-positive real part.
struct SpectrumViolation : NumericalError {
    using NumericalError::NumericalError;
};

// A linear system (Lyapunov solve, matrix inverse) is numerically singular.
struct SingularSystem : NumericalError {
    using NumericalError::NumericalError;
};

// A covariance that must be PSD came out with a clearly negative eigenvalue.
struct NonPSD : NumericalError {
    using NumericalError::NumericalError;
};

// An exact algebraic identity of the simulation failed beyond tolerance.
struct IdentityViolation : NumericalError {
    using NumericalError::NumericalError;
};

// Requested transition step would overflow the matrix exponential.
struct StepTooLarge : NumericalError {
    using NumericalError::NumericalError;
};

struct GridTooCoarse : NumericalError {
    using NumericalError::NumericalError;
};

struct GridMismatch : NumericalError {
    using NumericalError::NumericalError;
};

struct DimensionMismatch : NumericalError {
    using NumericalError::NumericalError;
};

struct NonZeroScalarPart : NumericalError {
    using NumericalError::NumericalError;
};

struct TruncationUnsupported : NumericalError {
    using NumericalError::NumericalError;
};

struct UnsupportedRepresentation : NumericalError {
    using NumericalError::NumericalError;
};

// ODE step rejected after exhausting local refinement levels.
struct StepRejected : NumericalError {
    using NumericalError::NumericalError;
};

// Monte Carlo standard errors too large to support the requested fit.
struct InsufficientData : NumericalError {
    using NumericalError::NumericalError;
};

// CLI / configuration problems (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};

struct ValidationError : ConfigError {
    ValidationError(const std::string& key, const std::string& what)
        : ConfigError("config key '" + key + "': " + what), key_(key) {}
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

}  // namespace roughmag
