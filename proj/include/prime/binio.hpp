#pragma once

// Little-endian binary file helpers shared by the checkpoint and dataset
// formats.  The build targets little-endian hosts only; the static_assert
// keeps the files honest about it.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "prime/errors.hpp"
#include "prime/tensor.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are defined little-endian");

namespace prime::binio {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ParseError(static_cast<std::size_t>(is.tellg()), std::string("truncated ") + what);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const char* what) {
    const auto n = read_pod<std::uint32_t>(is, what);
    if (n > (1u << 20)) throw ParseError(static_cast<std::size_t>(is.tellg()), "oversized string");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw ParseError(static_cast<std::size_t>(is.tellg()), std::string("truncated ") + what);
    return s;
}

inline void write_tensor(std::ostream& os, const Tensor& t) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline Tensor read_tensor(std::istream& is, const char* what) {
    const auto rank = read_pod<std::uint32_t>(is, what);
    if (rank > 4) throw ParseError(static_cast<std::size_t>(is.tellg()), "implausible tensor rank");
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i)
        shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is, what)));
    Tensor t(shape, 0.0);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw ParseError(static_cast<std::size_t>(is.tellg()), std::string("truncated ") + what);
    return t;
}

}  // namespace prime::binio
