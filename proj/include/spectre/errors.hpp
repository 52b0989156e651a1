#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spectre {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed an argument outside its documented range.
struct ParameterError : Error {
    using Error::Error;
};

// Input data is malformed (bad file header, wrong shape, non-finite values, ...).
struct DataError : Error {
    using Error::Error;
};

// Input data is degenerate in a way that makes the requested operation
// meaningless (e.g. all rows identical where a spread is required).
struct DegenerateDataError : DataError {
    using DataError::DataError;
};

// A numeric routine hit a state it cannot recover from.
struct NumericError : Error {
    using Error::Error;
};

// A matrix that must be (numerically) positive definite is not.
struct IllConditionedError : NumericError {
    using NumericError::NumericError;
};

// A filtering loop would have to continue with fewer samples than the
// dimension allows.
struct InsufficientDataError : NumericError {
    using NumericError::NumericError;
};

// An iterative solver ran out of iterations. Carries the best iterate seen
// so callers can decide whether it is still usable.
struct ConvergenceError : NumericError {
    ConvergenceError(const std::string& what, double value,
                     std::vector<double> vector, double residual)
        : NumericError(what), best_value(value),
          best_vector(std::move(vector)), best_residual(residual) {}

    double best_value;
    std::vector<double> best_vector;
    double best_residual;
};

}  // namespace spectre
