#pragma once

#include <stdexcept>
#include <string>

namespace ccwsi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a documented precondition.
/// The CLI maps this to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Anything that fails while doing the work: I/O, subprocess, decoding.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

} // namespace ccwsi
