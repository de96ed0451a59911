#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace loadpin {

/// Little-endian IEEE-754 float32 blobs.
inline void write_le_floats(std::ostream& out, const float* v, std::size_t n) {
    static_assert(sizeof(float) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * 4));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t u = __builtin_bswap32(std::bit_cast<std::uint32_t>(v[i]));
            out.write(reinterpret_cast<const char*>(&u), 4);
        }
    }
}

inline void write_le_floats(std::ostream& out, const std::vector<float>& v) { write_le_floats(out, v.data(), v.size()); }

inline std::vector<float> read_le_floats(std::istream& in, std::size_t n) {
    std::vector<float> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 4));
    if (static_cast<std::size_t>(in.gcount()) != n * 4) throw std::runtime_error("truncated float blob");
    if constexpr (std::endian::native != std::endian::little)
        for (float& f : v) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
    return v;
}

}  // namespace loadpin
