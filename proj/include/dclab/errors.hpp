#pragma once

#include <stdexcept>
#include <string>

namespace dclab {

// Bad user input or configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or truncated bitstream. The CLI maps this to exit code 3.
class StreamError : public std::runtime_error {
public:
    explicit StreamError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dclab
