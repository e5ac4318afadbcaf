#pragma once

#include <stdexcept>
#include <string>

namespace fsplat {

// Error categories map to process exit codes at the CLI boundary:
// config -> 2, data -> 3, numeric -> 4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// Programming-contract violations (bad shapes, out-of-range indices). These
// indicate bugs in calling code, not bad user input.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error("contract violation: " + msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace fsplat
