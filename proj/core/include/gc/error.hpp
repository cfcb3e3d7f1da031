#pragma once

#include <stdexcept>
#include <string>

namespace gc {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed files, bad configuration keys, broken manifests. CLI exit code 2.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Shape mismatches, non-finite values, degenerate geometry, failed
// optimization preconditions. CLI exit code 3.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace gc
