#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace s2d {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape, network topology or configuration mismatch.
// The CLI maps this to exit code 3.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed external input: bitstreams, containers, raster files.
// The CLI maps this to exit code 2.
class ParseError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <typename... Args>
std::string msg(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

}  // namespace detail

}  // namespace s2d
