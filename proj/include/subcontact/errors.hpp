#pragma once

#include <stdexcept>
#include <string>

namespace subcontact {

// Bad user input: config fields, precondition violations on public operations.
// The CLI maps this to exit code 1.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// A numerical procedure failed (non-convergence, instability, budget
// exceeded). The CLI maps this to exit code 2.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace subcontact
