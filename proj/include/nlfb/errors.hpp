#pragma once

#include <stdexcept>
#include <string>

namespace nlfb {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed inputs: kernels, reactions, configs. Maps to exit status 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Solver configuration that cannot be run (e.g. explicit-step budget).
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Caller broke an operation precondition.
class ContractError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DomainError : public ContractError {
public:
    using ContractError::ContractError;
};

class InsufficientDataError : public ContractError {
public:
    using ContractError::ContractError;
};

/// Kernel fails (J1): the free boundary accelerates, no semi-wave exists.
class NoSemiWaveError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Kernel fails (J2): no finite minimal traveling-wave speed.
class NoTravelingWaveError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RootNotFoundError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Iterative solve did not settle. Maps to exit status 2.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Memory or size cap exceeded. Maps to exit status 2.
class ResourceError : public Error {
public:
    using Error::Error;
};

} // namespace nlfb
