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

#include "dann/wire.hpp"

namespace dann::wire {

namespace {

void put_header(ByteWriter& w, MsgType type, uint64_t request_id) {
  w.u32(kMagic);
  w.u16(kVersion);
  w.u16(static_cast<uint16_t>(type));
  w.u64(request_id);
}

uint64_t check_header(ByteReader& r, MsgType want) {
  if (r.u32() != kMagic) raise(ErrorCode::protocol, "bad frame magic");
  if (r.u16() != kVersion) raise(ErrorCode::protocol, "unsupported protocol version");
  if (r.u16() != static_cast<uint16_t>(want)) raise(ErrorCode::protocol, "unexpected message type");
  return r.u64();
}

void put_scored(ByteWriter& w, const std::vector<ScoredId>& v) {
  w.u32(static_cast<uint32_t>(v.size()));
  for (const auto& s : v) {
    w.u64(s.id);
    w.f32(s.dist);
  }
}

std::vector<ScoredId> get_scored(ByteReader& r) {
  uint32_t n = r.u32();
  std::vector<ScoredId> v(n);
  for (uint32_t i = 0; i < n; ++i) {
    v[i].id = r.u64();
    v[i].dist = r.f32();
  }
  return v;
}

Status get_status(ByteReader& r) {
  uint8_t s = r.u8();
  if (s > 2) raise(ErrorCode::protocol, "bad status byte");
  return static_cast<Status>(s);
}

void expect_done(const ByteReader& r) {
  if (!r.done()) raise(ErrorCode::protocol, "trailing bytes in payload");
}

}  // namespace

std::vector<uint8_t> encode(const ScoreRequest& msg) {
  ByteWriter w;
  put_header(w, MsgType::score_request, msg.request_id);
  w.f32(msg.t);
  w.u32(msg.l);
  w.u32(static_cast<uint32_t>(msg.keys.size()));
  for (uint64_t k : msg.keys) w.u64(k);
  w.u32(static_cast<uint32_t>(msg.q.size()));
  for (float v : msg.q) w.f32(v);
  w.u32(static_cast<uint32_t>(msg.q_sdc.size()));
  w.bytes(msg.q_sdc);
  return w.take();
}

ScoreRequest decode_score_request(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  ScoreRequest msg;
  msg.request_id = check_header(r, MsgType::score_request);
  msg.t = r.f32();
  msg.l = r.u32();
  uint32_t nk = r.u32();
  msg.keys.resize(nk);
  for (uint32_t i = 0; i < nk; ++i) msg.keys[i] = r.u64();
  uint32_t dim = r.u32();
  msg.q.resize(dim);
  for (uint32_t i = 0; i < dim; ++i) msg.q[i] = r.f32();
  uint32_t cl = r.u32();
  auto code = r.bytes(cl);
  msg.q_sdc.assign(code.begin(), code.end());
  expect_done(r);
  return msg;
}

std::vector<uint8_t> encode(const ScoreResponse& msg) {
  ByteWriter w;
  put_header(w, MsgType::score_response, msg.request_id);
  w.u8(static_cast<uint8_t>(msg.status));
  put_scored(w, msg.r);
  put_scored(w, msg.c);
  w.u32(static_cast<uint32_t>(msg.missing.size()));
  for (uint64_t id : msg.missing) w.u64(id);
  return w.take();
}

ScoreResponse decode_score_response(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  ScoreResponse msg;
  msg.request_id = check_header(r, MsgType::score_response);
  msg.status = get_status(r);
  msg.r = get_scored(r);
  msg.c = get_scored(r);
  uint32_t nm = r.u32();
  msg.missing.resize(nm);
  for (uint32_t i = 0; i < nm; ++i) msg.missing[i] = r.u64();
  expect_done(r);
  return msg;
}

std::vector<uint8_t> encode(const QueryRequest& msg) {
  ByteWriter w;
  put_header(w, MsgType::query_request, msg.request_id);
  w.u32(static_cast<uint32_t>(msg.q.size()));
  for (float v : msg.q) w.f32(v);
  w.u32(msg.bw);
  w.u32(msg.h);
  w.u32(msg.k);
  w.u32(msg.l);
  w.u32(msg.k_head);
  return w.take();
}

QueryRequest decode_query_request(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  QueryRequest msg;
  msg.request_id = check_header(r, MsgType::query_request);
  uint32_t dim = r.u32();
  msg.q.resize(dim);
  for (uint32_t i = 0; i < dim; ++i) msg.q[i] = r.f32();
  msg.bw = r.u32();
  msg.h = r.u32();
  msg.k = r.u32();
  msg.l = r.u32();
  msg.k_head = r.u32();
  expect_done(r);
  return msg;
}

std::vector<uint8_t> encode(const QueryResponse& msg) {
  ByteWriter w;
  put_header(w, MsgType::query_response, msg.request_id);
  w.u8(static_cast<uint8_t>(msg.status));
  put_scored(w, msg.results);
  w.u32(msg.io_used);
  w.u32(msg.hops_executed);
  return w.take();
}

QueryResponse decode_query_response(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  QueryResponse msg;
  msg.request_id = check_header(r, MsgType::query_response);
  msg.status = get_status(r);
  msg.results = get_scored(r);
  msg.io_used = r.u32();
  msg.hops_executed = r.u32();
  expect_done(r);
  return msg;
}

std::vector<uint8_t> encode(const InjectRequest& msg) {
  ByteWriter w;
  put_header(w, MsgType::inject_request, msg.request_id);
  w.f32(msg.failure_rate);
  w.f32(msg.latency_ms);
  w.f32(msg.jitter_ms);
  return w.take();
}

InjectRequest decode_inject_request(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  InjectRequest msg;
  msg.request_id = check_header(r, MsgType::inject_request);
  msg.failure_rate = r.f32();
  msg.latency_ms = r.f32();
  msg.jitter_ms = r.f32();
  expect_done(r);
  return msg;
}

std::vector<uint8_t> encode(const InjectResponse& msg) {
  ByteWriter w;
  put_header(w, MsgType::inject_response, msg.request_id);
  w.u8(static_cast<uint8_t>(msg.status));
  return w.take();
}

InjectResponse decode_inject_response(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  InjectResponse msg;
  msg.request_id = check_header(r, MsgType::inject_response);
  msg.status = get_status(r);
  expect_done(r);
  return msg;
}

MsgType peek_type(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  if (r.u32() != kMagic) raise(ErrorCode::protocol, "bad frame magic");
  if (r.u16() != kVersion) raise(ErrorCode::protocol, "unsupported protocol version");
  uint16_t t = r.u16();
  if (t < 1 || t > 6) raise(ErrorCode::protocol, "unknown message type");
  return static_cast<MsgType>(t);
}

std::vector<uint8_t> frame(std::span<const uint8_t> payload) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(payload.size()));
  w.bytes(payload);
  return w.take();
}

}  // namespace dann::wire
