// include/oac/error.hpp - Error categories shared by every oac module.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oac {

enum class ErrorKind {
    config,     // invalid parameter or cross-field constraint
    shape,      // dimension/length mismatch
    index,      // index out of range
    domain,     // value outside the function's domain
    capacity,   // request does not fit the available resources
    divergence, // non-finite values during training
    io,         // file access or format problem
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::shape: return "shape";
    case ErrorKind::index: return "index";
    case ErrorKind::domain: return "domain";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string &message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string &message) {
    if (!condition) {
        fail(kind, message);
    }
}

} // namespace detail

} // namespace oac
