// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/socket.hpp"

#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "dw2/error.hpp"

namespace dw2 {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw SocketError(what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

Socket::Socket(int fd) : fd_(fd) {
  if (fd_ >= 0)
    set_nodelay(fd_);
}

Socket::~Socket() {
  close();
}

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_), counters_(other.counters_) {
  other.fd_ = -1;
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    counters_ = other.counters_;
    other.fd_ = -1;
  }
  return *this;
}

Socket Socket::connect_to(const std::string& host, uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  if (int rc = getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0)
    throw SocketError("resolve " + host + ": " + gai_strerror(rc));

  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    // Non-blocking connect so the timeout is enforceable.
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, int(timeout.count()));
      if (rc > 0) {
        int err = 0;
        socklen_t len = sizeof(err);
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else if (rc == 0) {
        rc = -1;
        errno = ETIMEDOUT;
      }
    }
    if (rc == 0) {
      fcntl(fd, F_SETFL, flags);
      freeaddrinfo(res);
      return Socket(fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  freeaddrinfo(res);
  throw SocketError("connect to " + host + ":" + port_str + " failed: " + last_error);
}

void Socket::send_all(const void* data, size_t len) {
  const auto* p = static_cast<const uint8_t*>(data);
  size_t sent = 0;
  while (sent < len) {
    const ssize_t n = ::send(fd_, p + sent, len - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw_errno("send");
    }
    sent += size_t(n);
    counters_->sent.fetch_add(uint64_t(n), std::memory_order_relaxed);
  }
}

void Socket::recv_exact(void* data, size_t len) {
  auto* p = static_cast<uint8_t*>(data);
  size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd_, p + got, len - got, 0);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw_errno("recv");
    }
    if (n == 0)
      throw SocketError("connection closed mid-frame");
    got += size_t(n);
    counters_->received.fetch_add(uint64_t(n), std::memory_order_relaxed);
  }
}

void Socket::send_frame(const std::vector<uint8_t>& frame) {
  send_all(frame.data(), frame.size());
}

bool Socket::recv_frame(std::vector<uint8_t>& out) {
  uint8_t len_bytes[4];
  // The first byte decides between clean EOF and truncation.
  for (;;) {
    const ssize_t n = ::recv(fd_, len_bytes, 1, 0);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw_errno("recv");
    }
    if (n == 0)
      return false;
    counters_->received.fetch_add(1, std::memory_order_relaxed);
    break;
  }
  recv_exact(len_bytes + 1, 3);
  const uint32_t total = uint32_t(len_bytes[0]) | uint32_t(len_bytes[1]) << 8 |
                         uint32_t(len_bytes[2]) << 16 | uint32_t(len_bytes[3]) << 24;
  if (total < 1)
    throw SocketError("invalid frame length 0");
  out.resize(4 + size_t(total));
  std::memcpy(out.data(), len_bytes, 4);
  recv_exact(out.data() + 4, total);
  return true;
}

std::optional<bool> Socket::recv_frame_for(std::vector<uint8_t>& out, std::chrono::milliseconds timeout) {
  if (!wait_readable(timeout))
    return std::nullopt;
  return recv_frame(out);
}

bool Socket::wait_readable(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, int(timeout.count()));
    if (rc < 0) {
      if (errno == EINTR)
        continue;
      throw_errno("poll");
    }
    return rc > 0;
  }
}

void Socket::shutdown_write() {
  if (fd_ >= 0)
    ::shutdown(fd_, SHUT_WR);
}

void Socket::shutdown_both() {
  if (fd_ >= 0)
    ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener::Listener(uint16_t port, int backlog) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0)
    throw_errno("socket");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const int e = errno;
    ::close(fd_);
    fd_ = -1;
    errno = e;
    throw_errno("bind port " + std::to_string(port));
  }
  if (::listen(fd_, backlog) < 0) {
    const int e = errno;
    ::close(fd_);
    fd_ = -1;
    errno = e;
    throw_errno("listen");
  }
  socklen_t len = sizeof(addr);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0)
    ::close(fd_);
}

Listener::Listener(Listener&& other) noexcept
    : fd_(other.fd_), port_(other.port_), stopped_(other.stopped_.load()) {
  other.fd_ = -1;
}

Listener& Listener::operator=(Listener&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0)
      ::close(fd_);
    fd_ = other.fd_;
    port_ = other.port_;
    stopped_.store(other.stopped_.load());
    other.fd_ = -1;
  }
  return *this;
}

std::optional<Socket> Listener::accept() {
  return accept_for(std::chrono::milliseconds(-1));
}

std::optional<Socket> Listener::accept_for(std::chrono::milliseconds timeout) {
  for (;;) {
    if (stopped_.load(std::memory_order_acquire))
      return std::nullopt;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, int(timeout.count()));
    if (rc < 0) {
      if (errno == EINTR)
        continue;
      throw_errno("poll");
    }
    if (rc == 0)
      return std::nullopt;  // timeout
    if (stopped_.load(std::memory_order_acquire))
      return std::nullopt;
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED)
        continue;
      if (stopped_.load(std::memory_order_acquire))
        return std::nullopt;
      throw_errno("accept");
    }
    return Socket(fd);
  }
}

void Listener::stop() {
  stopped_.store(true, std::memory_order_release);
  if (fd_ >= 0)
    ::shutdown(fd_, SHUT_RDWR);
}

}  // namespace dw2
