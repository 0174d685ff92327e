#pragma once

#include <stdexcept>
#include <string>

namespace nlheat {

/// Failure classes map one-to-one onto CLI exit codes (1, 2, 3).
enum class ErrorKind { Config = 1, Method = 2, Numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Invalid configuration or violated model invariant.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// The method could not produce its object (no bracket, inconclusive bisection,
/// omega-limit not captured).
class MethodError : public Error {
public:
    explicit MethodError(const std::string& what) : Error(ErrorKind::Method, what) {}
};

/// Linear solver, quadrature, Picard or Newton failure.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace nlheat
