#pragma once

#include <stdexcept>
#include <string>

namespace sia {

// Bad inputs: malformed manifests, missing files, out-of-range parameters.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Output already exists and --force was not given. CLI exit code 3.
class RefusedOverwrite : public std::runtime_error {
public:
    explicit RefusedOverwrite(const std::string& msg) : std::runtime_error(msg) {}
};

// Anything else that should not happen in a correct run. CLI exit code 4.
class InternalError : public std::runtime_error {
public:
    explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sia
