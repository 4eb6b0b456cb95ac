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

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dann/common.hpp"

namespace dann::net {

struct Addr {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  static Addr parse(const std::string& s);  // "host:port"
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Parses "h:p,h:p|h:p" into per-shard replica lists: ',' separates shards,
/// '|' separates replicas of one shard.
std::vector<std::vector<Addr>> parse_shard_list(const std::string& s);

/// Blocking connect with timeout; returns the fd.
int connect_to(const Addr& addr, double timeout_ms);

/// Length-prefixed frame I/O (u32 payload length + payload).
void write_frame(int fd, std::span<const uint8_t> payload);
std::vector<uint8_t> read_frame(int fd, double timeout_ms);

void close_fd(int fd);

/// Listening socket; port 0 binds an ephemeral port.
class Listener {
 public:
  Listener(const std::string& host, uint16_t port);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  /// Accepted connection fd, or -1 on timeout / after close().
  int accept_fd(double timeout_ms);
  void close();
  uint16_t port() const { return port_; }

 private:
  std::atomic<int> fd_{-1};
  uint16_t port_ = 0;
};

}  // namespace dann::net
