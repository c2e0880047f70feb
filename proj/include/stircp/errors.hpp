#pragma once

#include <stdexcept>
#include <string>

namespace stircp {

// Bad parameters or inputs. The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A computation that cannot finish within its budget (memory cap, step cap,
// non-convergence). The CLI maps these to exit code 3.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A statistical search that could not proceed, e.g. a bisection bracket with
// both ends on the same side. The CLI maps these to exit code 3.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace stircp
