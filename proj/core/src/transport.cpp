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

#include "dann/transport.hpp"

#include <algorithm>
#include <limits>

namespace dann {

ShardCall SimTransport::score(uint32_t shard, const wire::ScoreRequest& req) {
  if (shard >= shards_.size()) raise(ErrorCode::invalid_argument, "shard index out of range");
  std::lock_guard<std::mutex> guard(mu_);

  ShardCall call;
  auto payload = wire::encode(req);
  call.request_bytes = wire::frame(payload).size();

  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto draw = [&](double start) {
    ++attempts_;
    bool fail = cfg_.failure_rate > 0.0 && rng_.uniform() < cfg_.failure_rate;
    if (fail) ++failed_;
    double done = start + cfg_.fixed_ms + cfg_.jitter_ms * rng_.uniform();
    return std::pair<bool, double>(!fail, done);
  };

  auto [ok0, done0] = draw(0.0);
  bool ok = ok0;
  double done = done0;
  call.attempts = 1;
  double hedge_at =
      (cfg_.hedge_delay_ms && cfg_.replicas > 1) ? *cfg_.hedge_delay_ms : kInf;

  // Second attempt fires at the hedge point for a slow primary, or at the
  // failure report for a dead one. One duplicate at most.
  double second_start = kInf;
  if (!ok0 && cfg_.replicas > 1) second_start = std::min(done0, hedge_at);
  else if (ok0 && done0 > hedge_at) second_start = hedge_at;

  if (second_start < kInf) {
    auto [ok1, done1] = draw(second_start);
    call.attempts = 2;
    if (ok0 && ok1) {
      done = std::min(done0, done1);
      ok = true;
    } else if (ok0) {
      done = done0;
      ok = true;
    } else if (ok1) {
      done = done1;
      ok = true;
    } else {
      done = std::max(done0, done1);
      ok = false;
    }
  }

  if (done > cfg_.timeout_ms) {
    ok = false;
    done = cfg_.timeout_ms;
  }
  call.latency_ms = done;

  if (!ok) {
    call.ok = false;
    return call;
  }

  // Go through the real decode/score/encode path so in-process and TCP mode
  // produce identical bytes and results.
  wire::ScoreResponse resp;
  try {
    auto decoded = wire::decode_score_request(payload);
    auto result = shards_[shard]->score_nodes(decoded.keys, decoded.t, decoded.l, decoded.q,
                                              decoded.q_sdc);
    resp.request_id = decoded.request_id;
    resp.status = result.missing.empty() ? wire::Status::ok : wire::Status::partial;
    resp.r = std::move(result.r);
    resp.c = std::move(result.c);
    resp.missing = std::move(result.missing);
  } catch (const Error&) {
    resp.request_id = req.request_id;
    resp.status = wire::Status::error;
  }
  auto resp_payload = wire::encode(resp);
  call.response_bytes = wire::frame(resp_payload).size();
  call.response = wire::decode_score_response(resp_payload);
  call.ok = true;
  return call;
}

}  // namespace dann
