#pragma once

#include <stdexcept>
#include <string>

namespace evsim {

// Invalid scenario/matrix/CLI configuration. Exit code 2 at the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or malformed input/output files. Exit code 3 at the CLI.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal contract (scheduling in the past, double allocation, ...).
// Deliberately not caught anywhere inside the library.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

} // namespace evsim
