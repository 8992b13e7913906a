#pragma once

#include <stdexcept>
#include <string>

namespace tvlearn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched field shapes or inconsistent containers.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter values or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File access or format problems.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver. Carries the Newton iteration and, when
/// raised from a domain-decomposition run, the subdomain index (-1 otherwise).
class SolverError : public Error {
public:
    SolverError(const std::string& what, int iteration, int subdomain = -1)
        : Error(what), iteration_(iteration), subdomain_(subdomain) {}

    int iteration() const noexcept { return iteration_; }
    int subdomain() const noexcept { return subdomain_; }

private:
    int iteration_;
    int subdomain_;
};

}  // namespace tvlearn
