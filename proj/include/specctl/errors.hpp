#pragma once

#include <stdexcept>
#include <string>

namespace specctl {

// A caller broke an operation's precondition (shape mismatch, inconsistent
// observation, out-of-domain argument).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Invalid or incomplete configuration: bad config file, missing verifier for
// a mode that needs one, empty training set.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace specctl
