#pragma once

#include <stdexcept>
#include <string>

namespace hdsopt {

// Invalid arguments or configuration values.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// Linear-algebra failure that survives jitter escalation.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed experiment configuration (named key in the message).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hdsopt
