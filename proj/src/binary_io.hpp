#pragma once

// Little-endian primitives shared by the HFV1 and container codecs.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "hiersearch/error.hpp"

namespace hiersearch::detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF),
                              static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), b.size());
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v & 0xFFFFFFFFu));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error(ErrorKind::kFormat, std::string("truncated input while reading ") + what);
  }
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), b.size(), what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  const std::uint64_t lo = read_u32(in, what);
  const std::uint64_t hi = read_u32(in, what);
  return lo | (hi << 32);
}

inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_u32(in, what));
}
inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_u64(in, what));
}

constexpr std::uint32_t fourcc(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24);
}

}  // namespace hiersearch::detail
