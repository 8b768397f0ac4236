#pragma once

#include <stdexcept>
#include <string>

namespace mgopt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario parsing or validation failure. `field()` is a dotted path into the
/// config (e.g. `batteries[1].e_min`) or a series name.
class ScenarioError : public Error {
public:
    ScenarioError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ModelError : public Error {
public:
    using Error::Error;
};

class PowerFlowError : public Error {
public:
    using Error::Error;
};

} // namespace mgopt
