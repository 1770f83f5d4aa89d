#pragma once

#include <stdexcept>
#include <string>

namespace pspd {

// Bad argument to a library operation (shape mismatch, out-of-range label, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operation called in a state where it is not allowed (e.g. distillation
// curriculum requested before any teacher exists).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Configuration rejected before any work started.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pspd
