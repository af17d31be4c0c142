#pragma once

#include <stdexcept>
#include <string>

namespace cartloco {

// Invalid configuration supplied by the user (bad file, bad ranges). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke an API precondition (shape mismatch, step on terminated state).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Non-finite values or numerical breakdown at runtime.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cartloco
