#pragma once

#include <stdexcept>
#include <string>

namespace cogsteer {

// Base for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents (container headers, JSON lines, CSV).
class FormatError : public Error {
public:
    using Error::Error;
};

// A value violates a documented invariant or precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Numerical routine could not produce a usable result.
class NumericError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string & msg) {
    if (!cond) {
        throw ValidationError(msg);
    }
}

} // namespace cogsteer
