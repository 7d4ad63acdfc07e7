// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace isac {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input outside the mathematical domain of an operation (non-Hermitian,
/// non-PSD, angle out of range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public DomainError {
public:
    using DomainError::DomainError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised when a convex subproblem has no strictly feasible point.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace isac
