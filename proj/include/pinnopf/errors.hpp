#pragma once

#include <stdexcept>
#include <string>

namespace pinnopf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (case files, datasets, models, configs).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ConnectivityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Singular systems, non-finite losses, solver breakdowns.
class NumericalError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

} // namespace pinnopf
