#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "uxmc/errors.hpp"

// Little-endian primitives shared by the binary file formats.
namespace uxmc::binary {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
    out.write(b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
    out.write(b, 8);
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void write_magic(std::ostream& out, std::string_view magic) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n, std::string_view what) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw FormatError(std::string(what) + ": truncated input");
    }
}

inline std::uint32_t read_u32(std::istream& in, std::string_view what) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
}

inline std::uint64_t read_u64(std::istream& in, std::string_view what) {
    unsigned char b[8];
    read_exact(in, reinterpret_cast<char*>(b), 8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
}

inline float read_f32(std::istream& in, std::string_view what) { return std::bit_cast<float>(read_u32(in, what)); }

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
    std::string got(magic.size(), '\0');
    read_exact(in, got.data(), got.size(), what);
    if (got != magic) {
        throw FormatError(std::string(what) + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
}

}  // namespace uxmc::binary
