#pragma once

#include <stdexcept>
#include <string>

namespace ctl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad parameter, wrong kind of input).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A quantity that should be finite is not: divergent integral, supremum or dual.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// A numerical scheme failed to reach its tolerance or to bracket a root.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Work or memory cap exceeded (support size, wall clock).
class CapacityError : public Error {
public:
    using Error::Error;
};

}  // namespace ctl
