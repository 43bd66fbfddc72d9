#pragma once

// Little-endian primitives shared by the EMTR and EMMD readers/writers.
// Internal to src/, not part of the installed API.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace emids::bio {

inline void put_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u8(std::ostream& out, uint8_t v) { put_bytes(out, &v, 1); }

inline void put_u16(std::ostream& out, uint16_t v) {
    const uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
    put_bytes(out, b, 2);
}

inline void put_u32(std::ostream& out, uint32_t v) {
    const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                          static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    put_bytes(out, b, 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    put_bytes(out, b, 8);
}

inline void put_i32(std::ostream& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }
inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

template <typename Error>
void get_bytes(std::istream& in, void* p, size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n) {
        throw Error(std::string("truncated input while reading ") + what);
    }
}

template <typename Error>
uint8_t get_u8(std::istream& in, const char* what) {
    uint8_t b;
    get_bytes<Error>(in, &b, 1, what);
    return b;
}

template <typename Error>
uint16_t get_u16(std::istream& in, const char* what) {
    uint8_t b[2];
    get_bytes<Error>(in, b, 2, what);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

template <typename Error>
uint32_t get_u32(std::istream& in, const char* what) {
    uint8_t b[4];
    get_bytes<Error>(in, b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

template <typename Error>
uint64_t get_u64(std::istream& in, const char* what) {
    uint8_t b[8];
    get_bytes<Error>(in, b, 8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

template <typename Error>
int32_t get_i32(std::istream& in, const char* what) {
    return static_cast<int32_t>(get_u32<Error>(in, what));
}

template <typename Error>
float get_f32(std::istream& in, const char* what) {
    return std::bit_cast<float>(get_u32<Error>(in, what));
}

template <typename Error>
double get_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(get_u64<Error>(in, what));
}

} // namespace emids::bio
