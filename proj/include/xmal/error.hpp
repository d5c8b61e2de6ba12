#pragma once

#include <stdexcept>
#include <string>

namespace xmal {

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data (feature files, labels, pools) failed validation.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Experiment configuration is malformed or inconsistent.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A runtime invariant was breached; state is no longer trustworthy.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace xmal
