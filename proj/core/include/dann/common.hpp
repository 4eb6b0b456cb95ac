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

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dann {

enum class ErrorCode {
  invalid_argument,
  dim_mismatch,
  empty_dataset,
  bad_magic,
  truncated,
  bad_format,
  io_error,
  missing_code,
  wrong_shard,
  protocol,
  all_shards_failed,
  empty_head,
  stage_failed,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dim_mismatch: return "dimension mismatch";
    case ErrorCode::empty_dataset: return "empty dataset";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::bad_format: return "bad format";
    case ErrorCode::io_error: return "io error";
    case ErrorCode::missing_code: return "missing code";
    case ErrorCode::wrong_shard: return "wrong shard";
    case ErrorCode::protocol: return "protocol error";
    case ErrorCode::all_shards_failed: return "all shards failed";
    case ErrorCode::empty_head: return "empty head index";
    case ErrorCode::stage_failed: return "stage failed";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

// (id, squared-L2 distance) pair. All ordering in the system is by
// (dist, id) ascending so results are deterministic under ties.
struct ScoredId {
  uint64_t id = 0;
  float dist = 0.0f;

  friend bool operator==(const ScoredId& a, const ScoredId& b) {
    return a.id == b.id && a.dist == b.dist;
  }
};

struct ScoredLess {
  bool operator()(const ScoredId& a, const ScoredId& b) const {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.id < b.id;
  }
};

inline bool scored_less(const ScoredId& a, const ScoredId& b) { return ScoredLess{}(a, b); }

// Deterministic random source. mt19937_64 has a standard-mandated sequence
// and the uniform/normal mappings below are fixed, so streams are identical
// across platforms and library versions for a given seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  uint64_t below(uint64_t n) {
    if (n == 0) raise(ErrorCode::invalid_argument, "Rng::below(0)");
    return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Box-Muller without caching; two draws per sample.
  double normal() {
    double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 gen_;
};

// 64-bit avalanche mixer (splitmix64 finalizer). Stable across runs and
// machines; the node-store sharding function is defined on top of it.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// --- little-endian byte buffers (wire frames, packed nodes) ---

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void zeros(size_t n) { buf_.insert(buf_.end(), n, 0); }

  size_t size() const { return buf_.size(); }
  std::vector<uint8_t> take() { return std::move(buf_); }
  const std::vector<uint8_t>& data() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> buf) : buf_(buf) {}

  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() {
    auto b = take(2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  uint32_t u32() {
    auto b = take(4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const uint8_t> bytes(size_t n) { return take(n); }
  void skip(size_t n) { take(n); }

  size_t remaining() const { return buf_.size() - pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::span<const uint8_t> take(size_t n) {
    if (pos_ + n > buf_.size()) raise(ErrorCode::truncated, "byte buffer ends early");
    auto out = buf_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::span<const uint8_t> buf_;
  size_t pos_ = 0;
};

}  // namespace dann
