// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xfer {

// Invalid user input: malformed files, bad specs, rule violations.
// The CLI maps these to exit code 1; anything else is a runtime failure.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A dataset was about to be used as both source and target.
class SourceTargetViolation : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace xfer
