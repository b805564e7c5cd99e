#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbsec {

using byte_vec = std::vector<std::uint8_t>;
using Block16 = std::array<std::uint8_t, 16>;

std::string to_hex(std::span<const std::uint8_t> data);
byte_vec from_hex(const std::string& hex);  // throws std::invalid_argument on bad input

inline void put_be16(byte_vec& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_be32(byte_vec& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_be64(byte_vec& out, std::uint64_t v) {
    put_be32(out, static_cast<std::uint32_t>(v >> 32));
    put_be32(out, static_cast<std::uint32_t>(v));
}

inline std::uint16_t get_be16(std::span<const std::uint8_t> in, std::size_t off) {
    return static_cast<std::uint16_t>((in[off] << 8) | in[off + 1]);
}

inline std::uint32_t get_be32(std::span<const std::uint8_t> in, std::size_t off) {
    return (static_cast<std::uint32_t>(in[off]) << 24) |
           (static_cast<std::uint32_t>(in[off + 1]) << 16) |
           (static_cast<std::uint32_t>(in[off + 2]) << 8) |
           static_cast<std::uint32_t>(in[off + 3]);
}

inline std::uint64_t get_be64(std::span<const std::uint8_t> in, std::size_t off) {
    return (static_cast<std::uint64_t>(get_be32(in, off)) << 32) | get_be32(in, off + 4);
}

}  // namespace fbsec
