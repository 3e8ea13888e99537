#pragma once

#include <stdexcept>
#include <string>

namespace ness {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Internal = 1,
    NonConvergence = 2,
    Validation = 3,
    Config = 4,
    InvalidArgument = 5,
    Io = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace ness
