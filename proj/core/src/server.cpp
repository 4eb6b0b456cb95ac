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

#include "dann/server.hpp"

#include <chrono>
#include <condition_variable>
#include <functional>

namespace dann {

namespace {

constexpr double kIdleTimeoutMs = 120000.0;

void run_accept_loop(net::Listener& listener, std::atomic<bool>& stopping,
                     std::vector<std::thread>& conns, std::mutex& conns_mu,
                     std::function<void(int)> handler) {
  while (!stopping.load()) {
    int fd = listener.accept_fd(100.0);
    if (fd < 0) continue;
    std::lock_guard<std::mutex> guard(conns_mu);
    conns.emplace_back([fd, handler] { handler(fd); });
  }
}

void join_all(std::vector<std::thread>& conns, std::mutex& conns_mu) {
  std::vector<std::thread> local;
  {
    std::lock_guard<std::mutex> guard(conns_mu);
    local.swap(conns);
  }
  for (auto& t : local)
    if (t.joinable()) t.join();
}

}  // namespace

// ---- ShardServer ----

ShardServer::ShardServer(std::shared_ptr<Shard> shard, InjectParams inject, uint64_t seed)
    : shard_(std::move(shard)), inject_(inject), rng_(seed) {}

ShardServer::~ShardServer() { stop(); }

uint16_t ShardServer::start(const std::string& host, uint16_t port) {
  listener_ = std::make_unique<net::Listener>(host, port);
  stopping_.store(false);
  accept_thread_ = std::thread([this] {
    run_accept_loop(*listener_, stopping_, conns_, conns_mu_,
                    [this](int fd) { serve_connection(fd); });
  });
  return listener_->port();
}

void ShardServer::stop() {
  if (stopping_.exchange(true)) {
    if (accept_thread_.joinable()) accept_thread_.join();
    join_all(conns_, conns_mu_);
    return;
  }
  if (listener_) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  join_all(conns_, conns_mu_);
}

uint16_t ShardServer::port() const { return listener_ ? listener_->port() : 0; }

InjectParams ShardServer::inject_params() const {
  std::lock_guard<std::mutex> guard(mu_);
  return inject_;
}

void ShardServer::serve_connection(int fd) {
  while (!stopping_.load()) {
    std::vector<uint8_t> payload;
    try {
      payload = net::read_frame(fd, kIdleTimeoutMs);
    } catch (const Error&) {
      break;  // closed or timed out
    }
    try {
      auto type = wire::peek_type(payload);
      if (type == wire::MsgType::inject_request) {
        auto req = wire::decode_inject_request(payload);
        {
          std::lock_guard<std::mutex> guard(mu_);
          inject_.failure_rate = req.failure_rate;
          inject_.latency_ms = req.latency_ms;
          inject_.jitter_ms = req.jitter_ms;
        }
        wire::InjectResponse resp;
        resp.request_id = req.request_id;
        resp.status = wire::Status::ok;
        net::write_frame(fd, wire::encode(resp));
        continue;
      }
      if (type != wire::MsgType::score_request) {
        break;  // protocol violation; drop the connection
      }
      auto req = wire::decode_score_request(payload);
      bool fail;
      double delay;
      {
        std::lock_guard<std::mutex> guard(mu_);
        fail = inject_.failure_rate > 0.0 && rng_.uniform() < inject_.failure_rate;
        delay = inject_.latency_ms;
        if (inject_.jitter_ms > 0.0) delay += inject_.jitter_ms * rng_.uniform();
      }
      if (delay > 0.0)
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));

      wire::ScoreResponse resp;
      resp.request_id = req.request_id;
      if (fail) {
        resp.status = wire::Status::error;
      } else {
        try {
          auto result = shard_->score_nodes(req.keys, req.t, req.l, req.q, req.q_sdc);
          resp.status = result.missing.empty() ? wire::Status::ok : wire::Status::partial;
          resp.r = std::move(result.r);
          resp.c = std::move(result.c);
          resp.missing = std::move(result.missing);
        } catch (const Error&) {
          resp.status = wire::Status::error;
        }
      }
      net::write_frame(fd, wire::encode(resp));
    } catch (const Error&) {
      break;
    }
  }
  net::close_fd(fd);
}

// ---- TcpTransport ----

TcpTransport::TcpTransport(std::vector<std::vector<net::Addr>> shard_replicas,
                           TransportConfig cfg)
    : addrs_(std::move(shard_replicas)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& replicas : addrs_)
    if (replicas.empty()) raise(ErrorCode::invalid_argument, "shard with no replica address");
}

ShardCall TcpTransport::score(uint32_t shard, const wire::ScoreRequest& req) {
  if (shard >= addrs_.size()) raise(ErrorCode::invalid_argument, "shard index out of range");
  const auto& replicas = addrs_[shard];

  struct Pending {
    std::mutex mu;
    std::condition_variable cv;
    bool won = false;
    wire::ScoreResponse resp;
    size_t resp_bytes = 0;
    uint32_t issued = 0;
    uint32_t finished = 0;
  };
  auto state = std::make_shared<Pending>();
  auto payload = std::make_shared<std::vector<uint8_t>>(wire::encode(req));
  double timeout = cfg_.timeout_ms;

  auto attempt = [state, payload, timeout](net::Addr addr) {
    bool ok = false;
    wire::ScoreResponse resp;
    size_t bytes = 0;
    try {
      int fd = net::connect_to(addr, timeout);
      try {
        net::write_frame(fd, *payload);
        auto reply = net::read_frame(fd, timeout);
        bytes = reply.size() + 4;
        resp = wire::decode_score_response(reply);
        ok = resp.status != wire::Status::error;
      } catch (...) {
        net::close_fd(fd);
        throw;
      }
      net::close_fd(fd);
    } catch (const Error&) {
      ok = false;
    }
    std::lock_guard<std::mutex> guard(state->mu);
    state->finished++;
    if (ok && !state->won) {
      state->won = true;
      state->resp = std::move(resp);
      state->resp_bytes = bytes;
    }
    state->cv.notify_all();
  };

  auto start = std::chrono::steady_clock::now();
  auto issue = [&](uint32_t replica) {
    state->issued++;
    std::thread(attempt, replicas[replica % replicas.size()]).detach();
  };

  std::unique_lock<std::mutex> lock(state->mu);
  issue(0);

  auto deadline = start + std::chrono::duration<double, std::milli>(timeout);
  bool hedged = false;
  double hedge_ms = (cfg_.hedge_delay_ms && replicas.size() > 1)
                        ? *cfg_.hedge_delay_ms
                        : -1.0;
  while (true) {
    if (state->won) break;
    bool all_done = state->finished >= state->issued;
    if (all_done && (state->issued >= replicas.size() || replicas.size() == 1)) break;
    if (all_done) {
      // Every outstanding attempt failed; fail over to the next replica.
      issue(state->issued);
      continue;
    }
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) break;
    if (!hedged && hedge_ms >= 0.0) {
      auto hedge_point = start + std::chrono::duration<double, std::milli>(hedge_ms);
      if (now >= hedge_point) {
        hedged = true;
        if (state->issued < replicas.size()) issue(state->issued);
        continue;
      }
      state->cv.wait_until(lock, std::min(deadline, hedge_point));
    } else {
      state->cv.wait_until(lock, deadline);
    }
  }

  ShardCall call;
  call.request_bytes = payload->size() + 4;
  call.attempts = state->issued;
  call.latency_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  if (state->won) {
    call.ok = true;
    call.response = std::move(state->resp);
    call.response_bytes = state->resp_bytes;
  }
  return call;
}

// ---- OrchestratorServer ----

OrchestratorServer::OrchestratorServer(HeadIndex head, Codebook cb, SdcTable sdc,
                                       std::vector<std::vector<net::Addr>> shard_replicas,
                                       TransportConfig cfg, SearchParams defaults)
    : head_(std::move(head)), cb_(std::move(cb)), sdc_(std::move(sdc)),
      transport_(std::move(shard_replicas), cfg), defaults_(defaults) {}

OrchestratorServer::~OrchestratorServer() { stop(); }

uint16_t OrchestratorServer::start(const std::string& host, uint16_t port) {
  listener_ = std::make_unique<net::Listener>(host, port);
  stopping_.store(false);
  accept_thread_ = std::thread([this] {
    run_accept_loop(*listener_, stopping_, conns_, conns_mu_,
                    [this](int fd) { serve_connection(fd); });
  });
  return listener_->port();
}

void OrchestratorServer::stop() {
  if (stopping_.exchange(true)) {
    if (accept_thread_.joinable()) accept_thread_.join();
    join_all(conns_, conns_mu_);
    return;
  }
  if (listener_) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  join_all(conns_, conns_mu_);
}

uint16_t OrchestratorServer::port() const { return listener_ ? listener_->port() : 0; }

void OrchestratorServer::serve_connection(int fd) {
  while (!stopping_.load()) {
    std::vector<uint8_t> payload;
    try {
      payload = net::read_frame(fd, kIdleTimeoutMs);
    } catch (const Error&) {
      break;
    }
    wire::QueryResponse resp;
    try {
      if (wire::peek_type(payload) != wire::MsgType::query_request) break;
      auto req = wire::decode_query_request(payload);
      resp.request_id = req.request_id;

      SearchParams params = defaults_;
      if (req.bw) params.bw = req.bw;
      params.h = req.h;  // 0 hops is a legal request
      if (req.k) params.k = req.k;
      if (req.l) params.l = req.l;
      if (req.k_head) params.k_head = req.k_head;

      try {
        auto result = search(req.q, params, transport_, head_, cb_, sdc_);
        resp.status = result.stats.failed_calls == 0 ? wire::Status::ok : wire::Status::partial;
        resp.results = std::move(result.results);
        resp.io_used = result.stats.io_used;
        resp.hops_executed = result.stats.hops_executed;
      } catch (const SearchFailure& e) {
        resp.status = wire::Status::error;
        resp.results = e.partial();
        resp.io_used = e.stats().io_used;
        resp.hops_executed = e.stats().hops_executed;
      } catch (const Error&) {
        resp.status = wire::Status::error;
      }
      net::write_frame(fd, wire::encode(resp));
    } catch (const Error&) {
      break;
    }
  }
  net::close_fd(fd);
}

wire::QueryResponse query_orchestrator(const net::Addr& addr, const wire::QueryRequest& req,
                                       double timeout_ms) {
  int fd = net::connect_to(addr, timeout_ms);
  try {
    net::write_frame(fd, wire::encode(req));
    auto reply = net::read_frame(fd, timeout_ms);
    auto resp = wire::decode_query_response(reply);
    net::close_fd(fd);
    return resp;
  } catch (...) {
    net::close_fd(fd);
    throw;
  }
}

wire::InjectResponse send_inject(const net::Addr& addr, const wire::InjectRequest& req,
                                 double timeout_ms) {
  int fd = net::connect_to(addr, timeout_ms);
  try {
    net::write_frame(fd, wire::encode(req));
    auto reply = net::read_frame(fd, timeout_ms);
    auto resp = wire::decode_inject_response(reply);
    net::close_fd(fd);
    return resp;
  } catch (...) {
    net::close_fd(fd);
    throw;
  }
}

}  // namespace dann
