#pragma once

#include <stdexcept>
#include <string>

namespace flowbots {

// Base class for every error raised by the library. `kind()` is the stable
// machine-readable tag the CLI and the teleop protocol report.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Non-physical input: negative pressure, zero area, bad fraction...
class DomainError : public Error {
public:
    explicit DomainError(const std::string& message) : Error("domain_error", message) {}
};

class BlockedElementError : public Error {
public:
    explicit BlockedElementError(const std::string& message)
        : Error("blocked_element", message) {}
};

// A source with no return path to a reservoir, or an otherwise singular topology.
class OpenCircuitError : public Error {
public:
    explicit OpenCircuitError(const std::string& message) : Error("open_circuit", message) {}
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& message, double last_residual, double time = -1.0)
        : Error("convergence", message), last_residual_(last_residual), time_(time) {}

    double last_residual() const noexcept { return last_residual_; }
    // Simulation time of the failing step; negative for steady solves.
    double time() const noexcept { return time_; }

private:
    double last_residual_;
    double time_;
};

class ConfigurationError : public Error {
public:
    explicit ConfigurationError(const std::string& message)
        : Error("configuration", message) {}
};

class LookupError : public Error {
public:
    explicit LookupError(const std::string& message) : Error("lookup", message) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& message) : Error("input", message) {}
};

// Response extraction: the curve never settles within the series.
class UnsettledError : public Error {
public:
    explicit UnsettledError(const std::string& message) : Error("unsettled", message) {}
};

// Response extraction: no deformation onset in the series.
class NoDeformationError : public Error {
public:
    explicit NoDeformationError(const std::string& message) : Error("no_deformation", message) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line)
        : Error("parse", message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace flowbots
