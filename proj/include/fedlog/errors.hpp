#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedlog {

/// Bad structural setup: mismatched layer dims, invalid hyperparameters.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad data fed to an operation: label out of range, odd split, etc.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inconsistency between federation participants (dims, shapes, ids).
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed byte stream; `offset` is the byte position of the defect.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace fedlog
