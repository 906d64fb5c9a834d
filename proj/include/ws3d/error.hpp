#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ws3d {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content. Carries the 1-based line number for text formats
/// or the byte offset for binary formats (whichever applies, the other is 0).
class MalformedInput : public Error {
public:
    MalformedInput(const std::string& what, std::size_t line, std::size_t byte_offset = 0)
        : Error(what), line_(line), byte_offset_(byte_offset) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t line_;
    std::size_t byte_offset_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// A proposal or annotation request whose cylinder holds no points.
class EmptyProposal : public Error {
public:
    using Error::Error;
};

}  // namespace ws3d
