#ifndef DOCAUSAL_ERROR_HPP
#define DOCAUSAL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace docausal {

// Input or configuration that fails a precondition. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure during estimation. The CLI maps these to exit code 2.
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularMatrixError : public ComputationError {
public:
    using ComputationError::ComputationError;
};

class ConvergenceError : public ComputationError {
public:
    using ComputationError::ComputationError;
};

class PositivityError : public ComputationError {
public:
    using ComputationError::ComputationError;
};

}  // namespace docausal

#endif  // DOCAUSAL_ERROR_HPP
