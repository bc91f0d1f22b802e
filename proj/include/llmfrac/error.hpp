#pragma once

#include <stdexcept>
#include <string>

namespace llmfrac {

/// Runtime failure: bad input data, I/O, numerical precondition.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid invocation (missing or contradictory options). Maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace llmfrac
