// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dw2/mailbox.hpp"
#include "dw2/protocol.hpp"
#include "dw2/socket.hpp"

namespace dw2 {

// Rank used by the dispatcher when registering on the coordinator control
// plane (displays use their display_id).
inline constexpr uint32_t kDispatcherRank = 0xfffffffeu;

struct ReceivedMessage {
  size_t member = 0;  // accept side: the peer's rank; connect side: endpoint index
  Message msg;
};

struct GroupOptions {
  std::chrono::milliseconds handshake_timeout = std::chrono::seconds(30);
  // How long close() waits for peers to finish the shutdown handshake
  // before forcing sockets closed.
  std::chrono::milliseconds drain_timeout = std::chrono::seconds(10);
};

/// A set of TCP connections managed as one logical group. Each member owns a
/// pair of worker threads: one draining its outgoing mailbox onto the socket,
/// one decoding received frames into the shared incoming mailbox (tiles are
/// posted under their header frame id, control messages under
/// kControlFrameId). Group formation uses a Register/RegisterAck handshake
/// with a session token and peer count, so the accepting side knows when all
/// peers are connected; acks are sent only once the group is complete.
class SocketGroup {
 public:
  /// Connect to every endpoint, send a Register on each and wait for every
  /// RegisterAck. Throws SocketError on connection failure, token rejection
  /// (the peer answers Shutdown), or handshake timeout.
  static std::unique_ptr<SocketGroup> connect_group(const std::vector<Endpoint>& endpoints,
                                                    uint64_t token, uint32_t peer_rank,
                                                    uint32_t peer_count, GroupOptions options = {});

  /// Accept registrations until the group is complete, then ack every peer.
  /// expected_peers == 0 learns the count from the first Register (peers all
  /// announce the same count). Connections with a wrong token are refused
  /// (answered with Shutdown) without aborting formation; a duplicate or
  /// out-of-range peer_rank or an inconsistent count aborts with ProtocolError.
  static std::unique_ptr<SocketGroup> accept_group(Listener& listener, uint64_t token,
                                                   uint32_t expected_peers,
                                                   GroupOptions options = {});

  ~SocketGroup();
  SocketGroup(const SocketGroup&) = delete;
  SocketGroup& operator=(const SocketGroup&) = delete;

  size_t size() const { return members_.size(); }

  /// Peer count announced during formation (accept side).
  uint32_t peer_count() const { return peer_count_; }

  /// Enqueue for one member; a dedicated send worker serializes and writes.
  /// FIFO per member. Throws SocketError if the group is closed or failed.
  void send_to(size_t member, Message msg);

  /// send_to every member (each receives its own copy).
  void broadcast(const Message& msg);

  /// Shared mailbox of decoded messages from all members. Closed when every
  /// member reached end-of-stream, on failure, and on close().
  TimestampedMailbox<ReceivedMessage>& incoming() { return incoming_; }

  /// Graceful teardown: stop accepting sends, flush every outgoing mailbox,
  /// shut the write sides down, then wait (bounded by drain_timeout) for
  /// peers to close before forcing. Idempotent; safe from any thread.
  void close();

  bool failed() const { return failed_.load(std::memory_order_acquire); }
  std::string failure_reason() const;

  uint64_t bytes_sent() const;
  uint64_t bytes_received() const;
  uint64_t payload_bytes_sent() const { return payload_sent_.load(std::memory_order_relaxed); }
  uint64_t payload_bytes_received() const { return payload_received_.load(std::memory_order_relaxed); }

 private:
  struct Member {
    Socket socket;
    TimestampedMailbox<Message> outgoing;
    std::thread sender;
    std::thread receiver;
  };

  SocketGroup(std::vector<Socket> sockets, GroupOptions options);

  void start_workers();
  void sender_loop(Member& m);
  void receiver_loop(Member& m, size_t index);
  void fail(const std::string& reason);

  GroupOptions options_;
  std::vector<std::unique_ptr<Member>> members_;
  TimestampedMailbox<ReceivedMessage> incoming_;
  uint32_t peer_count_ = 0;

  std::atomic<bool> failed_{false};
  std::atomic<bool> closing_{false};
  mutable std::mutex state_mutex_;
  std::string failure_reason_;
  bool closed_ = false;

  std::atomic<size_t> live_receivers_{0};
  std::mutex drain_mutex_;
  std::condition_variable drain_cv_;

  std::atomic<uint64_t> payload_sent_{0};
  std::atomic<uint64_t> payload_received_{0};
};

}  // namespace dw2
