#pragma once

#include <stdexcept>
#include <string>

namespace cfield {

// Argument outside an operation's domain (bad sizes, nonpositive depth, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operation invoked on an object whose state does not allow it.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A world point that lies on or behind the camera plane.
class BehindCameraError : public DomainError {
public:
    using DomainError::DomainError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace cfield
