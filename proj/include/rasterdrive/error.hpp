#pragma once

#include <stdexcept>
#include <string>

namespace rasterdrive {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    /// Short machine-readable category, e.g. "schema".
    virtual const char* kind() const noexcept { return "error"; }
};

/// Input text is not well-formed JSON.
class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

/// Well-formed input with missing fields, wrong types or bad ordering.
class SchemaError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "schema"; }
};

/// A geometric or domain invariant does not hold (non-orthonormal rotation,
/// non-positive box size, ...).
class InvariantError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invariant"; }
};

/// A query lies outside the valid domain of an operation.
class RangeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "range"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

}  // namespace rasterdrive
