#pragma once

#include <stdexcept>
#include <string>

namespace knnmode {

// Invalid configuration, instance, or argument. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data (bad CSV row, truncated binary file, ...).
struct ParseError : ConfigError {
    explicit ParseError(const std::string& what) : ConfigError(what) {}
};

}  // namespace knnmode
