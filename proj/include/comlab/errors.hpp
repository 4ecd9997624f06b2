#pragma once

#include <stdexcept>
#include <string>

namespace comlab {

// Grid/interval geometry mismatch: endpoints do not land on sample points.
struct AlignmentError : std::runtime_error {
    explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

// Requested object needs finer sampling than the grid provides.
struct ResolutionError : std::runtime_error {
    explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent operator / family configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Exact evaluation not implemented for the requested parameters.
struct UnsupportedExactError : std::runtime_error {
    explicit UnsupportedExactError(const std::string& what) : std::runtime_error(what) {}
};

// Predicted cost exceeds the configured ceiling.  Carries the estimate.
struct BudgetError : std::runtime_error {
    double predicted_ops;
    double ceiling;
    BudgetError(double predicted, double limit, const std::string& what)
        : std::runtime_error(what), predicted_ops(predicted), ceiling(limit) {}
};

// Series evaluation outside the coefficient radius of convergence.
struct DivergenceRiskError : std::runtime_error {
    explicit DivergenceRiskError(const std::string& what) : std::runtime_error(what) {}
};

// Degenerate numeric input (zero divisor, empty set, ...).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// Bad command line / config file input.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace comlab
