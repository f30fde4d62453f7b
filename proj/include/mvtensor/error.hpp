#pragma once

#include <stdexcept>
#include <string>

namespace mvtensor {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A parameter or input violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A computation produced a result that fails an internal consistency check.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A file could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A file was readable but its content is malformed.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

} // namespace mvtensor
