#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace prime {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/layer dimension mismatch.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape error: " + what) {}
};

// Malformed input data; carries the byte offset where decoding failed.
class ParseError : public Error {
public:
    ParseError(std::size_t byte_offset, const std::string& what)
        : Error("parse error at byte " + std::to_string(byte_offset) + ": " + what),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Input container is not a format we support at all.
class UnsupportedFormatError : public Error {
public:
    explicit UnsupportedFormatError(const std::string& what)
        : Error("unsupported format: " + what) {}
};

// Configuration rejected; carries the full list of problems, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "invalid configuration:";
        for (const auto& p : problems) out += "\n  - " + p;
        return out;
    }
    std::vector<std::string> problems_;
};

// Probed weight matrix has no singular value above the filter threshold.
class DegenerateMatrixError : public Error {
public:
    explicit DegenerateMatrixError(const std::string& what)
        : Error("degenerate matrix: " + what) {}
};

}  // namespace prime
