#pragma once

// Little-endian primitives for the binary file formats, independent of host
// byte order.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "loopdet/types.h"

namespace loopdet::io {

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  write_bytes(out, b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) {
    b[i] = static_cast<unsigned char>(v >> (8 * i));
  }
  write_bytes(out, b, 8);
}

inline void write_i64(std::ostream& out, std::int64_t v) {
  write_u64(out, static_cast<std::uint64_t>(v));
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline void read_bytes(std::istream& in, void* data, std::size_t n,
                       const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw DataError(std::string("unexpected end of file while reading ") + what);
  }
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_bytes(in, b, 4, what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  read_bytes(in, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | b[i];
  }
  return v;
}

inline std::int64_t read_i64(std::istream& in, const char* what) {
  return static_cast<std::int64_t>(read_u64(in, what));
}

inline double read_f64(std::istream& in, const char* what) {
  const std::uint64_t bits = read_u64(in, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace loopdet::io
