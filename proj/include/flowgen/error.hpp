#pragma once

#include <stdexcept>
#include <string>

namespace flowgen {

/// Thrown when an input violates a documented precondition (bad dimensions,
/// malformed files, invalid configuration). The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown for failures that are not the caller's fault: I/O, corrupted
/// external state. The CLI maps it to exit code 3.
class RuntimeError : public std::runtime_error {
public:
    explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace flowgen
