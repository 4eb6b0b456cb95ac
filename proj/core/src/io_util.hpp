// Copyright 2026-present the dann project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian stream helpers shared by the file formats. Not installed.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>

#include "dann/common.hpp"

namespace dann::io {

inline void write_raw(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out) raise(ErrorCode::io_error, "short write");
}

inline void read_raw(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) raise(ErrorCode::truncated, "file ends early");
}

inline void put_u8(std::ostream& out, uint8_t v) { write_raw(out, &v, 1); }

inline void put_u16(std::ostream& out, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  write_raw(out, b, 2);
}

inline void put_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  write_raw(out, b, 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  write_raw(out, b, 8);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

inline uint8_t get_u8(std::istream& in) {
  uint8_t v;
  read_raw(in, &v, 1);
  return v;
}

inline uint16_t get_u16(std::istream& in) {
  uint8_t b[2];
  read_raw(in, b, 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline uint32_t get_u32(std::istream& in) {
  uint8_t b[4];
  read_raw(in, b, 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t get_u64(std::istream& in) {
  uint64_t lo = get_u32(in);
  uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

// f32/u64 arrays: byte layout on a little-endian host matches the file
// layout, so bulk-copy there and fall back to per-element elsewhere.
inline void put_f32_array(std::ostream& out, std::span<const float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    write_raw(out, v.data(), v.size() * sizeof(float));
  } else {
    for (float x : v) put_f32(out, x);
  }
}

inline void get_f32_array(std::istream& in, std::span<float> v) {
  if constexpr (std::endian::native == std::endian::little) {
    read_raw(in, v.data(), v.size() * sizeof(float));
  } else {
    for (float& x : v) x = get_f32(in);
  }
}

inline void put_u64_array(std::ostream& out, std::span<const uint64_t> v) {
  if constexpr (std::endian::native == std::endian::little) {
    write_raw(out, v.data(), v.size() * sizeof(uint64_t));
  } else {
    for (uint64_t x : v) put_u64(out, x);
  }
}

inline void get_u64_array(std::istream& in, std::span<uint64_t> v) {
  if constexpr (std::endian::native == std::endian::little) {
    read_raw(in, v.data(), v.size() * sizeof(uint64_t));
  } else {
    for (uint64_t& x : v) x = get_u64(in);
  }
}

inline void put_magic(std::ostream& out, const char magic[8]) { write_raw(out, magic, 8); }

inline void check_magic(std::istream& in, const char magic[8], const std::string& what) {
  char got[8];
  read_raw(in, got, 8);
  if (std::memcmp(got, magic, 8) != 0) raise(ErrorCode::bad_magic, "not a " + what + " file");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::io_error, "cannot open for write: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io_error, "cannot open for read: " + path);
  return in;
}

}  // namespace dann::io
