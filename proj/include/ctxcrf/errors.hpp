#pragma once

#include <stdexcept>
#include <string>

namespace ctxcrf {

// Rejected input: malformed records, out-of-range labels, dimension mismatches.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures (missing files, failed writes or renames).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ctxcrf
