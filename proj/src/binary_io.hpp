#pragma once

// Little-endian primitives shared by the dataset cache and the model container.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "hiloc/types.hpp"

namespace hiloc::detail {

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    }
    out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw FormatError(std::string("truncated input while reading ") + what);
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(buf[i]) << (8 * i);
    }
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_le<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const char* what) {
    const auto n = get_le<std::uint64_t>(in, what);
    if (n > (std::uint64_t{1} << 32)) {
        throw FormatError(std::string("implausible length for ") + what);
    }
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw FormatError(std::string("truncated input while reading ") + what);
    }
    return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[9], const char* kind) {
    char buf[8];
    if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
        throw FormatError(std::string("not a ") + kind + " (bad magic bytes)");
    }
}

}  // namespace hiloc::detail
