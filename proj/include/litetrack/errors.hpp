#pragma once

#include <stdexcept>
#include <string>

namespace litetrack {

// Error taxonomy used across the library. All of these derive from
// std::runtime_error so callers can catch coarsely; the CLI maps any of
// them to exit code 1 (bad input) as opposed to 2 (internal failure).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents do not line up (matmul shapes, patch divisibility, ...).
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// A ModelConfig or WeightStore violates its contract.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Bad user-supplied data: files, boxes, frames.
struct InputError : Error {
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// Index outside a valid range (e.g. a non-interaction encoder layer).
struct RangeError : Error {
    explicit RangeError(const std::string& msg) : Error(msg) {}
};

// Mathematically degenerate argument (zero-area box, ...).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

} // namespace litetrack
