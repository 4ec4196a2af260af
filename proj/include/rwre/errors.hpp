#pragma once

#include <stdexcept>
#include <string>

namespace rwre {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A probability vector failed the sum / nonnegativity check beyond the hard limit.
struct NormalizationError : Error {
    using Error::Error;
};

// The site law is degenerate: with probability one a single step carries full mass.
struct EllipticityError : Error {
    using Error::Error;
};

struct EmptySupportError : Error {
    using Error::Error;
};

// Two coupled walkers were given the same replica seed.
struct SeedCollisionError : Error {
    using Error::Error;
};

// b - a is not an allowed step.
struct InvalidStepError : Error {
    using Error::Error;
};

// Target site cannot be written as a sum of the requested number of steps.
struct UnreachableError : Error {
    using Error::Error;
};

// A dynamic-programming table exceeded the configured support cap.
struct ResourceError : Error {
    using Error::Error;
};

struct InsufficientSamplesError : Error {
    using Error::Error;
};

// Direction theta with theta^T D theta = 0 passed to a CLT test.
struct DegenerateDirectionError : Error {
    using Error::Error;
};

struct UnknownObservableError : Error {
    using Error::Error;
};

// Centering series shorter than the largest index the time grid requires.
struct IndexError : Error {
    using Error::Error;
};

// Configuration file failed to parse or validate.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace rwre
