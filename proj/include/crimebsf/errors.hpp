#pragma once

#include <stdexcept>
#include <string>

namespace crimebsf {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration, schema violations, invalid user input. CLI exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

// Numerical or sampling failure on valid input. CLI exit code 1.
class ComputeError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

}  // namespace crimebsf
