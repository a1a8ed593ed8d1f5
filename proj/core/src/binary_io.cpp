// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "fdmimo/types.hpp"

namespace fdmimo::io {
namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf.begin(), buf.end());
  }
  os.write(buf.data(), buf.size());
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  std::array<char, sizeof(T)> buf;
  if (!is.read(buf.data(), buf.size())) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf.begin(), buf.end());
  }
  T v;
  std::memcpy(&v, buf.data(), sizeof(T));
  return v;
}

}  // namespace

void write_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), magic.size()); }
void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
void write_f32(std::ostream& os, float v) { write_le(os, v); }
void write_f64(std::ostream& os, double v) { write_le(os, v); }

void expect_magic(std::istream& is, std::string_view magic) {
  std::string buf(magic.size(), '\0');
  if (!is.read(buf.data(), buf.size())) {
    throw FormatError("truncated file while reading magic");
  }
  if (buf != magic) {
    throw FormatError("bad magic: expected " + std::string(magic));
  }
}

std::uint32_t read_u32(std::istream& is, const char* what) { return read_le<std::uint32_t>(is, what); }
std::uint64_t read_u64(std::istream& is, const char* what) { return read_le<std::uint64_t>(is, what); }
float read_f32(std::istream& is, const char* what) { return read_le<float>(is, what); }
double read_f64(std::istream& is, const char* what) { return read_le<double>(is, what); }

}  // namespace fdmimo::io
