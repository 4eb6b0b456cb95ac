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

#include <memory>
#include <mutex>
#include <vector>

#include "dann/common.hpp"
#include "dann/node_store.hpp"
#include "dann/wire.hpp"

namespace dann {

/// Outcome of one (possibly hedged) scoring call against a shard.
struct ShardCall {
  bool ok = false;
  wire::ScoreResponse response;
  double latency_ms = 0.0;
  size_t request_bytes = 0;
  size_t response_bytes = 0;
  uint32_t attempts = 0;
};

/// How the orchestrator talks to shards. One call = one hop's batch for one
/// shard, including replica failover and hedging per the transport config.
class ScoreTransport {
 public:
  virtual ~ScoreTransport() = default;
  virtual uint32_t shard_count() const = 0;
  virtual ShardCall score(uint32_t shard, const wire::ScoreRequest& req) = 0;
  /// Sequential transports are driven one call at a time in ascending shard
  /// order, which keeps virtual time and rng draws deterministic.
  virtual bool sequential() const { return true; }
};

/// In-process transport over a loaded ShardSet with a deterministic virtual
/// clock. Requests and responses still round-trip through the wire encoding
/// so byte counts (and any encode/decode effects) match TCP mode exactly.
///
/// Failure and latency are drawn per replica attempt. A failed primary fails
/// over to the next replica when it reports back; a slow primary is hedged
/// at hedge_delay_ms when configured. First success wins. A call whose
/// completion would exceed timeout_ms counts as failed.
class SimTransport final : public ScoreTransport {
 public:
  explicit SimTransport(const ShardSet& set)
      : shards_(set.shards), cfg_(set.transport), rng_(set.transport.seed) {
    cfg_.validate();
  }

  uint32_t shard_count() const override { return static_cast<uint32_t>(shards_.size()); }
  ShardCall score(uint32_t shard, const wire::ScoreRequest& req) override;
  bool sequential() const override { return true; }

  const TransportConfig& config() const { return cfg_; }
  void set_config(const TransportConfig& cfg) {
    cfg.validate();
    cfg_ = cfg;
  }

  // Injection statistics over replica attempts, for the binomial check.
  uint64_t attempts() const { return attempts_; }
  uint64_t failed_attempts() const { return failed_; }

 private:
  std::vector<std::shared_ptr<Shard>> shards_;
  TransportConfig cfg_;
  Rng rng_;
  std::mutex mu_;
  uint64_t attempts_ = 0;
  uint64_t failed_ = 0;
};

}  // namespace dann
