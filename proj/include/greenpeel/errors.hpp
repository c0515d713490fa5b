#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace greenpeel {

/// Bad user input: configuration, preconditions on sizes, malformed files.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Any failure while computing. The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EllipticityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Requested dense object would exceed the configured node cap.
class CapExceeded : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SolverError : public RuntimeFailure {
public:
    SolverError(const std::string& what, double residual)
        : RuntimeFailure(what + " (relative residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class FactorizationError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Passive learning could not separate block contributions from the data.
class InsufficientDiversity : public RuntimeFailure {
public:
    InsufficientDiversity(const std::string& what, std::vector<int> boxes, int level)
        : RuntimeFailure(what), boxes_(std::move(boxes)), level_(level) {}
    const std::vector<int>& starved_boxes() const { return boxes_; }
    int level() const { return level_; }

private:
    std::vector<int> boxes_;
    int level_;
};

}  // namespace greenpeel
