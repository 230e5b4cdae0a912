#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace diresa {

/// Shape or structural mismatch (layer widths, tape/model pairing, matrix sizes).
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration or API usage (bad spec, unknown config key, missing input).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric blow-up: non-finite values during integration or training.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Degenerate statistics: constant feature, single-row batch, zero-variance input.
class DegenerateError : public std::runtime_error {
public:
    explicit DegenerateError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file contents; carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::uint64_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::uint64_t offset;
};

/// Filesystem failure: unreadable, unwritable, or missing path.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace diresa
