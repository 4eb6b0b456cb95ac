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

#include "dann/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace dann::net {

namespace {

void set_nonblocking(int fd, bool on) {
  int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0) raise(ErrorCode::io_error, "fcntl failed");
  if (on)
    flags |= O_NONBLOCK;
  else
    flags &= ~O_NONBLOCK;
  if (fcntl(fd, F_SETFL, flags) < 0) raise(ErrorCode::io_error, "fcntl failed");
}

void wait_readable(int fd, double timeout_ms) {
  struct pollfd pfd{fd, POLLIN, 0};
  int rc = ::poll(&pfd, 1, timeout_ms < 0 ? -1 : static_cast<int>(timeout_ms));
  if (rc == 0) raise(ErrorCode::io_error, "read timed out");
  if (rc < 0) raise(ErrorCode::io_error, std::string("poll: ") + std::strerror(errno));
}

}  // namespace

Addr Addr::parse(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos || colon + 1 >= s.size())
    raise(ErrorCode::invalid_argument, "address must be host:port, got '" + s + "'");
  Addr a;
  a.host = s.substr(0, colon);
  int port = std::stoi(s.substr(colon + 1));
  if (port < 1 || port > 65535) raise(ErrorCode::invalid_argument, "port out of range");
  a.port = static_cast<uint16_t>(port);
  return a;
}

std::vector<std::vector<Addr>> parse_shard_list(const std::string& s) {
  std::vector<std::vector<Addr>> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    std::string shard = s.substr(start, comma == std::string::npos ? std::string::npos
                                                                   : comma - start);
    if (!shard.empty()) {
      std::vector<Addr> replicas;
      size_t rs = 0;
      while (rs <= shard.size()) {
        size_t bar = shard.find('|', rs);
        std::string one =
            shard.substr(rs, bar == std::string::npos ? std::string::npos : bar - rs);
        if (!one.empty()) replicas.push_back(Addr::parse(one));
        if (bar == std::string::npos) break;
        rs = bar + 1;
      }
      if (replicas.empty()) raise(ErrorCode::invalid_argument, "empty shard address entry");
      out.push_back(std::move(replicas));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) raise(ErrorCode::invalid_argument, "no shard addresses given");
  return out;
}

int connect_to(const Addr& addr, double timeout_ms) {
  struct addrinfo hints {};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  struct addrinfo* res = nullptr;
  std::string port = std::to_string(addr.port);
  if (getaddrinfo(addr.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr)
    raise(ErrorCode::io_error, "cannot resolve " + addr.str());

  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    freeaddrinfo(res);
    raise(ErrorCode::io_error, "socket() failed");
  }
  set_nonblocking(fd, true);
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  freeaddrinfo(res);
  if (rc < 0 && errno != EINPROGRESS) {
    ::close(fd);
    raise(ErrorCode::io_error, "connect to " + addr.str() + " failed");
  }
  if (rc < 0) {
    struct pollfd pfd{fd, POLLOUT, 0};
    rc = ::poll(&pfd, 1, timeout_ms < 0 ? -1 : static_cast<int>(timeout_ms));
    int err = 0;
    socklen_t len = sizeof(err);
    if (rc <= 0 || getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
      ::close(fd);
      raise(ErrorCode::io_error, "connect to " + addr.str() + " timed out or failed");
    }
  }
  set_nonblocking(fd, false);
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

void write_frame(int fd, std::span<const uint8_t> payload) {
  uint8_t len[4];
  uint32_t n = static_cast<uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) len[i] = static_cast<uint8_t>(n >> (8 * i));

  auto send_all = [&](const uint8_t* p, size_t count) {
    size_t sent = 0;
    while (sent < count) {
      ssize_t rc = ::send(fd, p + sent, count - sent, MSG_NOSIGNAL);
      if (rc < 0) {
        if (errno == EINTR) continue;
        raise(ErrorCode::io_error, std::string("send: ") + std::strerror(errno));
      }
      sent += static_cast<size_t>(rc);
    }
  };
  send_all(len, 4);
  send_all(payload.data(), payload.size());
}

std::vector<uint8_t> read_frame(int fd, double timeout_ms) {
  auto recv_all = [&](uint8_t* p, size_t count) {
    size_t got = 0;
    while (got < count) {
      wait_readable(fd, timeout_ms);
      ssize_t rc = ::recv(fd, p + got, count - got, 0);
      if (rc == 0) raise(ErrorCode::io_error, "connection closed");
      if (rc < 0) {
        if (errno == EINTR) continue;
        raise(ErrorCode::io_error, std::string("recv: ") + std::strerror(errno));
      }
      got += static_cast<size_t>(rc);
    }
  };
  uint8_t len[4];
  recv_all(len, 4);
  uint32_t n = static_cast<uint32_t>(len[0]) | (static_cast<uint32_t>(len[1]) << 8) |
               (static_cast<uint32_t>(len[2]) << 16) | (static_cast<uint32_t>(len[3]) << 24);
  if (n > (64u << 20)) raise(ErrorCode::protocol, "frame too large");
  std::vector<uint8_t> payload(n);
  if (n > 0) recv_all(payload.data(), n);
  return payload;
}

void close_fd(int fd) {
  if (fd >= 0) ::close(fd);
}

Listener::Listener(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) raise(ErrorCode::io_error, "socket() failed");
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  struct sockaddr_in sa {};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
    ::close(fd);
    raise(ErrorCode::invalid_argument, "listener host must be an IPv4 address");
  }
  if (::bind(fd, reinterpret_cast<struct sockaddr*>(&sa), sizeof(sa)) != 0) {
    ::close(fd);
    raise(ErrorCode::io_error, "bind to " + host + ":" + std::to_string(port) + " failed");
  }
  if (::listen(fd, 64) != 0) {
    ::close(fd);
    raise(ErrorCode::io_error, "listen failed");
  }
  socklen_t len = sizeof(sa);
  if (getsockname(fd, reinterpret_cast<struct sockaddr*>(&sa), &len) != 0) {
    ::close(fd);
    raise(ErrorCode::io_error, "getsockname failed");
  }
  port_ = ntohs(sa.sin_port);
  fd_.store(fd);
}

Listener::~Listener() { close(); }

int Listener::accept_fd(double timeout_ms) {
  int fd = fd_.load();
  if (fd < 0) return -1;
  struct pollfd pfd{fd, POLLIN, 0};
  int rc = ::poll(&pfd, 1, timeout_ms < 0 ? -1 : static_cast<int>(timeout_ms));
  if (rc <= 0) return -1;
  int conn = ::accept(fd, nullptr, nullptr);
  return conn;  // -1 if the listener was closed under us
}

void Listener::close() {
  int fd = fd_.exchange(-1);
  if (fd >= 0) ::close(fd);
}

}  // namespace dann::net
