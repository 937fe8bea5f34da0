#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fluidsim {

// Raised when an input (spec struct, scenario file, profile) violates a
// documented invariant. Carries every violation found, not just the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::string message)
        : std::runtime_error(message), errors_{std::move(message)} {}

    explicit ValidationError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors) {
        std::string out;
        for (const auto& e : errors) {
            if (!out.empty()) out += "; ";
            out += e;
        }
        return out.empty() ? std::string("validation error") : out;
    }

    std::vector<std::string> errors_;
};

// Collects field-level validation failures before throwing them as one error.
class ValidationCollector {
public:
    void fail(const std::string& field, const std::string& why) {
        errors_.push_back(field + ": " + why);
    }

    bool ok() const { return errors_.empty(); }
    const std::vector<std::string>& errors() const { return errors_; }

    void throw_if_failed() const {
        if (!errors_.empty()) throw ValidationError(errors_);
    }

private:
    std::vector<std::string> errors_;
};

} // namespace fluidsim
