#pragma once

// Little-endian primitives for the checkpoint and PMI table formats.

#include <bit>
#include <functional>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tdq/error.hpp"

namespace tdq::io {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    fail(ErrorKind::Format, std::string("truncated input while reading ") + what);
  }
  return to_little(v);
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_pod(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_pod(os, v); }
inline void write_f64(std::ostream& os, double v) { write_pod(os, v); }

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  return read_pod<std::uint32_t>(is, what);
}
inline std::uint64_t read_u64(std::istream& is, const char* what) {
  return read_pod<std::uint64_t>(is, what);
}
inline double read_f64(std::istream& is, const char* what) {
  return read_pod<double>(is, what);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const char* what,
                               std::uint32_t max_len = 1u << 20) {
  const std::uint32_t n = read_u32(is, what);
  if (n > max_len) fail(ErrorKind::Format, std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (is.gcount() != static_cast<std::streamsize>(n)) {
    fail(ErrorKind::Format, std::string("truncated input while reading ") + what);
  }
  return s;
}

inline void write_magic(std::ostream& os, const char (&magic)[9]) { os.write(magic, 8); }

inline void expect_magic(std::istream& is, const char (&magic)[9], const char* what) {
  char buf[8];
  is.read(buf, 8);
  if (is.gcount() != 8 || std::memcmp(buf, magic, 8) != 0) {
    fail(ErrorKind::Format, std::string("bad magic: not a ") + what);
  }
}

// Writes to `path + ".tmp"` then renames, so readers never see partial files.
void write_atomically(const std::string& path,
                      const std::function<void(std::ostream&)>& body);

}  // namespace tdq::io
