#pragma once

#include <stdexcept>
#include <string>

namespace rcdiag {

// Base for everything the toolkit throws. The CLI maps subclasses to
// exit codes: usage -> 1, data -> 2, numeric/training -> 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text or records (bad line numbers, missing fields).
struct ParseError : Error {
    using Error::Error;
};

// Structurally well-formed data that violates a dataset invariant.
struct ValidationError : Error {
    using Error::Error;
};

// A corruption transform cannot be applied to the given dataset.
struct TransformError : Error {
    using Error::Error;
};

// Memory encoding failed (e.g. window mode without candidates).
struct EncodingError : Error {
    using Error::Error;
};

// Non-finite values inside model computations.
struct NumericError : Error {
    using Error::Error;
};

// Training diverged or was mis-configured at runtime.
struct TrainError : Error {
    using Error::Error;
};

// Bad command-line usage or plan/config files.
struct UsageError : Error {
    using Error::Error;
};

// Filesystem trouble (missing input, unwritable output).
struct IoError : Error {
    using Error::Error;
};

}  // namespace rcdiag
