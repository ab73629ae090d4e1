#pragma once

#include <stdexcept>
#include <string>

namespace fluxfed {

// Bad user input: config fields, CLI usage, dimension mismatches. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content. Carries the byte offset where parsing gave up.
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

// Non-finite values where finite math is required (loss blow-up, bad inputs).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fluxfed
