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
#include <thread>
#include <vector>

#include "dann/net.hpp"
#include "dann/node_store.hpp"
#include "dann/orchestrator.hpp"
#include "dann/transport.hpp"

namespace dann {

/// Runtime-adjustable failure/latency injection for a shard server.
struct InjectParams {
  double failure_rate = 0.0;
  double latency_ms = 0.0;
  double jitter_ms = 0.0;
};

/// TCP node-scoring service: answers ScoreRequest frames for one shard and
/// InjectRequest frames that update the injection knobs at runtime.
/// An injected failure responds with an error status after the injected
/// latency, mirroring a timed-out batch.
class ShardServer {
 public:
  ShardServer(std::shared_ptr<Shard> shard, InjectParams inject, uint64_t seed = 1);
  ~ShardServer();

  /// Binds and starts the accept loop; returns the bound port.
  uint16_t start(const std::string& host, uint16_t port);
  void stop();
  uint16_t port() const;

  InjectParams inject_params() const;

 private:
  void serve_connection(int fd);

  std::shared_ptr<Shard> shard_;
  mutable std::mutex mu_;
  InjectParams inject_;
  Rng rng_;
  std::unique_ptr<net::Listener> listener_;
  std::thread accept_thread_;
  std::atomic<bool> stopping_{false};
  std::vector<std::thread> conns_;
  std::mutex conns_mu_;
};

/// TCP scoring transport: one fresh connection per call, per-replica
/// failover on error, and a duplicate (hedged) request after hedge_delay_ms
/// when the primary is slow. First success wins; an error-status response
/// counts as a failed attempt.
class TcpTransport final : public ScoreTransport {
 public:
  TcpTransport(std::vector<std::vector<net::Addr>> shard_replicas, TransportConfig cfg);

  uint32_t shard_count() const override { return static_cast<uint32_t>(addrs_.size()); }
  ShardCall score(uint32_t shard, const wire::ScoreRequest& req) override;
  bool sequential() const override { return false; }

 private:
  std::vector<std::vector<net::Addr>> addrs_;
  TransportConfig cfg_;
};

/// TCP orchestration service: answers QueryRequest frames by running the
/// distributed search against its shard transport. Zero-valued BW/k/L/k_head
/// request fields fall back to the server defaults; H is taken as sent
/// (zero hops is a legal query).
class OrchestratorServer {
 public:
  OrchestratorServer(HeadIndex head, Codebook cb, SdcTable sdc,
                     std::vector<std::vector<net::Addr>> shard_replicas, TransportConfig cfg,
                     SearchParams defaults);
  ~OrchestratorServer();

  uint16_t start(const std::string& host, uint16_t port);
  void stop();
  uint16_t port() const;

 private:
  void serve_connection(int fd);

  HeadIndex head_;
  Codebook cb_;
  SdcTable sdc_;
  TcpTransport transport_;
  SearchParams defaults_;
  std::unique_ptr<net::Listener> listener_;
  std::thread accept_thread_;
  std::atomic<bool> stopping_{false};
  std::vector<std::thread> conns_;
  std::mutex conns_mu_;
};

/// One QueryRequest round trip.
wire::QueryResponse query_orchestrator(const net::Addr& addr, const wire::QueryRequest& req,
                                       double timeout_ms = 30000.0);

/// One InjectRequest round trip against a shard server.
wire::InjectResponse send_inject(const net::Addr& addr, const wire::InjectRequest& req,
                                 double timeout_ms = 10000.0);

}  // namespace dann
