// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hpft {

// Violation of a documented precondition (bad shapes, out-of-range ids,
// malformed configs). Callers are expected not to catch these during normal
// operation; the CLI maps them to exit code 2.
struct ContractViolation : std::invalid_argument {
    explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// An SPD solve failed even after jitter was applied.
struct SingularKernelError : std::runtime_error {
    explicit SingularKernelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss. Carries the epoch where it happened.
struct DivergenceError : std::runtime_error {
    int epoch;
    DivergenceError(const std::string& msg, int epoch_idx)
        : std::runtime_error(msg), epoch(epoch_idx) {}
};

// A run configuration failed schema validation; the message names the
// offending key. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A referenced input (checkpoint, dataset, run directory) does not exist.
struct MissingInputError : std::runtime_error {
    explicit MissingInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Output directory already holds results and --force was not given.
struct OutputConflictError : std::runtime_error {
    explicit OutputConflictError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace hpft
