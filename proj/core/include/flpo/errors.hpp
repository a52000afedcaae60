#pragma once

#include <stdexcept>
#include <string>

namespace flpo {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition on the caller's inputs was violated (shape mismatch etc).
class ContractError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// A node sequence does not satisfy the absorbing path rules.
class PathError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string field, std::size_t line = 0)
        : Error(what), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class PolicyError : public Error {
public:
    using Error::Error;
};

// The policy file was produced for a different (instance, Y) pair.
class StalePolicyError : public PolicyError {
public:
    using PolicyError::PolicyError;
};

// Enumeration would exceed the configured trajectory budget.
class GuardError : public Error {
public:
    using Error::Error;
};

}  // namespace flpo
