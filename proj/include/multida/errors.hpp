#pragma once

#include <stdexcept>
#include <string>

namespace multida {

// Bad input: malformed files, inconsistent shapes, violated preconditions.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation produced a value it cannot recover from (non-finite scores etc.).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace multida
