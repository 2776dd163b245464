// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dw2/wall_config.hpp"

namespace dw2 {

/// Move-only RAII wrapper around a connected TCP socket. TCP_NODELAY is set
/// on every socket: tile streams are latency-sensitive and small control
/// messages must not be coalesced. Byte counters are updated by whichever
/// thread performs the I/O and may be read from any thread.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd);
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect_to(const std::string& host, uint16_t port,
                           std::chrono::milliseconds timeout = std::chrono::seconds(30));
  static Socket connect_to(const Endpoint& ep,
                           std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    return connect_to(ep.host, ep.port, timeout);
  }

  bool valid() const { return fd_ >= 0; }

  void send_all(const void* data, size_t len);
  void recv_exact(void* data, size_t len);

  /// Send one length-prefixed wire frame (as produced by encode()).
  void send_frame(const std::vector<uint8_t>& frame);

  /// Receive one complete wire frame including the length prefix.
  /// Returns false on clean EOF at a frame boundary; throws SocketError on
  /// EOF mid-frame or any transport error.
  bool recv_frame(std::vector<uint8_t>& out);

  /// recv_frame with a deadline (used during handshakes). nullopt = timeout.
  std::optional<bool> recv_frame_for(std::vector<uint8_t>& out, std::chrono::milliseconds timeout);

  void shutdown_write();
  void shutdown_both();
  void close();

  uint64_t bytes_sent() const { return counters_->sent.load(std::memory_order_relaxed); }
  uint64_t bytes_received() const { return counters_->received.load(std::memory_order_relaxed); }

 private:
  struct Counters {
    std::atomic<uint64_t> sent{0};
    std::atomic<uint64_t> received{0};
  };

  bool wait_readable(std::chrono::milliseconds timeout);

  int fd_ = -1;
  // Heap-allocated so moved-from sockets keep counter reads safe.
  std::shared_ptr<Counters> counters_ = std::make_shared<Counters>();
};

/// RAII listening socket. Binding port 0 picks an ephemeral port, readable
/// via port() afterwards. stop() unblocks a concurrent accept().
class Listener {
 public:
  Listener() = default;
  explicit Listener(uint16_t port, int backlog = 64);
  ~Listener();
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&& other) noexcept;
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  bool valid() const { return fd_ >= 0; }
  uint16_t port() const { return port_; }

  /// Blocks for the next connection. nullopt after stop().
  std::optional<Socket> accept();

  /// accept with a deadline. nullopt on timeout or stop().
  std::optional<Socket> accept_for(std::chrono::milliseconds timeout);

  void stop();
  bool stopped() const { return stopped_.load(std::memory_order_acquire); }

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopped_{false};
};

}  // namespace dw2
