// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace fdmimo::io {

// Little-endian primitive writers/readers shared by the binary file formats.
// Readers throw FormatError on a short read; `what` names the field.

void write_magic(std::ostream& os, std::string_view magic);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);

void expect_magic(std::istream& is, std::string_view magic);
std::uint32_t read_u32(std::istream& is, const char* what);
std::uint64_t read_u64(std::istream& is, const char* what);
float read_f32(std::istream& is, const char* what);
double read_f64(std::istream& is, const char* what);

}  // namespace fdmimo::io
