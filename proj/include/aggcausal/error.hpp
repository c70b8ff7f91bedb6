#pragma once

#include <stdexcept>
#include <string>

namespace aggcausal {

// Base error carrying a stable machine-readable code (e.g. "SPEC_CYCLE").
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Invalid model spec, config or arguments. The CLI maps these to exit code 2.
class SpecError : public Error {
public:
    using Error::Error;
};

// Failure while computing (non-finite values, singular systems, degenerate data).
// The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace aggcausal
