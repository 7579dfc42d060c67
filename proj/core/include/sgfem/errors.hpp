#pragma once

#include <stdexcept>
#include <string>

namespace sgfem {

/// Raised when a numerical procedure cannot deliver a trustworthy result
/// (loss of orthogonality, indefinite operator, solver stagnation, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed run configurations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sgfem
