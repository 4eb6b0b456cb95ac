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

#include <cstdint>
#include <span>
#include <vector>

#include "dann/common.hpp"

namespace dann::wire {

// Framing: every message travels as u32 payload length + payload.
// Payload header: magic u32 = 0xDA17, version u16 = 1, type u16,
// request_id u64. All little-endian.

constexpr uint32_t kMagic = 0xDA17;
constexpr uint16_t kVersion = 1;

enum class MsgType : uint16_t {
  score_request = 1,
  score_response = 2,
  query_request = 3,
  query_response = 4,
  inject_request = 5,
  inject_response = 6,
};

enum class Status : uint8_t { ok = 0, partial = 1, error = 2 };

struct ScoreRequest {
  uint64_t request_id = 0;
  float t = 0.0f;
  uint32_t l = 0;
  std::vector<uint64_t> keys;
  std::vector<float> q;
  std::vector<uint8_t> q_sdc;
};

struct ScoreResponse {
  uint64_t request_id = 0;
  Status status = Status::ok;
  std::vector<ScoredId> r;
  std::vector<ScoredId> c;
  std::vector<uint64_t> missing;
};

struct QueryRequest {
  uint64_t request_id = 0;
  std::vector<float> q;
  uint32_t bw = 0, h = 0, k = 0, l = 0, k_head = 0;
};

struct QueryResponse {
  uint64_t request_id = 0;
  Status status = Status::ok;
  std::vector<ScoredId> results;
  uint32_t io_used = 0;
  uint32_t hops_executed = 0;
};

// Runtime failure/latency injection for a running shard server.
struct InjectRequest {
  uint64_t request_id = 0;
  float failure_rate = 0.0f;
  float latency_ms = 0.0f;
  float jitter_ms = 0.0f;
};

struct InjectResponse {
  uint64_t request_id = 0;
  Status status = Status::ok;
};

// Payload encoders (no frame length prefix).
std::vector<uint8_t> encode(const ScoreRequest& msg);
std::vector<uint8_t> encode(const ScoreResponse& msg);
std::vector<uint8_t> encode(const QueryRequest& msg);
std::vector<uint8_t> encode(const QueryResponse& msg);
std::vector<uint8_t> encode(const InjectRequest& msg);
std::vector<uint8_t> encode(const InjectResponse& msg);

/// Message type of an encoded payload; validates magic and version.
MsgType peek_type(std::span<const uint8_t> payload);

ScoreRequest decode_score_request(std::span<const uint8_t> payload);
ScoreResponse decode_score_response(std::span<const uint8_t> payload);
QueryRequest decode_query_request(std::span<const uint8_t> payload);
QueryResponse decode_query_response(std::span<const uint8_t> payload);
InjectRequest decode_inject_request(std::span<const uint8_t> payload);
InjectResponse decode_inject_response(std::span<const uint8_t> payload);

/// Prepends the u32 length prefix.
std::vector<uint8_t> frame(std::span<const uint8_t> payload);

}  // namespace dann::wire
