#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coldstart {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input or arguments. The CLI maps this family to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class RangeError : public InputError {
public:
    using InputError::InputError;
};

class ArgumentError : public InputError {
public:
    using InputError::InputError;
};

class EmptyResultError : public InputError {
public:
    using InputError::InputError;
};

// The data cannot support the method (degenerate clustering, no intersection). Exit code 3.
class MethodError : public Error {
public:
    using Error::Error;
};

class DegenerateModelError : public MethodError {
public:
    using MethodError::MethodError;
};

class NoIntersectionError : public MethodError {
public:
    using MethodError::MethodError;
};

// An internal consistency check failed. Exit code 4.
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace coldstart
