// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/socket_group.hpp"

#include <algorithm>

#include "dw2/error.hpp"
#include "dw2/log.hpp"

namespace dw2 {
namespace {

std::chrono::milliseconds time_left(std::chrono::steady_clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return std::max(left, std::chrono::milliseconds(0));
}

// Payload bytes are what the client actually produced (compressed tile
// bodies); used to account for dispatcher-mode send amplification.
uint64_t payload_of(const Message& msg) {
  if (const auto* tile = std::get_if<Tile>(&msg)) return tile->payload.size();
  return 0;
}

}  // namespace

SocketGroup::SocketGroup(std::vector<Socket> sockets, GroupOptions options) : options_(options) {
  members_.reserve(sockets.size());
  for (auto& s : sockets) {
    auto m = std::make_unique<Member>();
    m->socket = std::move(s);
    members_.push_back(std::move(m));
  }
}

std::unique_ptr<SocketGroup> SocketGroup::connect_group(const std::vector<Endpoint>& endpoints,
                                                        uint64_t token, uint32_t peer_rank,
                                                        uint32_t peer_count, GroupOptions options) {
  if (endpoints.empty()) throw SocketError("connect_group: no endpoints");
  auto deadline = std::chrono::steady_clock::now() + options.handshake_timeout;

  std::vector<Socket> sockets;
  sockets.reserve(endpoints.size());
  // Send every Register before waiting for any ack: the accepting side only
  // acks once all of its peers registered, so interleaving send/wait could
  // deadlock a multi-endpoint formation.
  for (const auto& ep : endpoints) {
    Socket s = Socket::connect_to(ep.host, ep.port, time_left(deadline));
    s.send_frame(encode(Register{token, peer_rank, peer_count}));
    sockets.push_back(std::move(s));
  }
  for (size_t i = 0; i < sockets.size(); ++i) {
    std::vector<uint8_t> frame;
    auto got = sockets[i].recv_frame_for(frame, time_left(deadline));
    if (!got)
      throw SocketError("group handshake with " + endpoints[i].host + ":" +
                        std::to_string(endpoints[i].port) + ": timed out waiting for ack");
    if (!*got)
      throw SocketError("group handshake with " + endpoints[i].host + ":" +
                        std::to_string(endpoints[i].port) + ": connection closed before ack");
    Message reply = decode(frame);
    if (std::holds_alternative<Shutdown>(reply))
      throw SocketError("group handshake with " + endpoints[i].host + ":" +
                        std::to_string(endpoints[i].port) + ": registration refused");
    if (!std::holds_alternative<RegisterAck>(reply))
      throw ProtocolError("group handshake: expected register_ack, got tag " +
                          std::to_string(static_cast<unsigned>(tag_of(reply))));
  }

  auto group = std::unique_ptr<SocketGroup>(new SocketGroup(std::move(sockets), options));
  group->peer_count_ = peer_count;
  group->start_workers();
  return group;
}

std::unique_ptr<SocketGroup> SocketGroup::accept_group(Listener& listener, uint64_t token,
                                                       uint32_t expected_peers, GroupOptions options) {
  auto deadline = std::chrono::steady_clock::now() + options.handshake_timeout;
  uint32_t count = expected_peers;
  size_t have = 0;
  std::vector<Socket> slots;
  if (count != 0) slots.resize(count);

  while (count == 0 || have < count) {
    auto left = time_left(deadline);
    if (left.count() == 0) throw SocketError("accept_group: timed out waiting for peers");
    auto conn = listener.accept_for(left);
    if (!conn) {
      if (listener.stopped()) throw SocketError("accept_group: listener stopped");
      throw SocketError("accept_group: timed out waiting for peers");
    }

    std::vector<uint8_t> frame;
    Register reg;
    try {
      auto got = conn->recv_frame_for(frame, time_left(deadline));
      if (!got || !*got) continue;  // gone (or silent) before registering
      Message msg = decode(frame);
      auto* r = std::get_if<Register>(&msg);
      if (!r) throw ProtocolError("expected register");
      reg = *r;
    } catch (const Error& e) {
      LOG_WARN("accept_group: dropping connection: %s", e.what());
      continue;
    }

    if (reg.session_token != token) {
      LOG_WARN("accept_group: refusing peer with wrong session token");
      try {
        conn->send_frame(encode(Shutdown{}));
      } catch (const Error&) {
      }
      continue;
    }
    if (count == 0) {
      if (reg.peer_count == 0) throw ProtocolError("accept_group: peer announced count 0");
      count = reg.peer_count;
      slots.resize(count);
    }
    if (reg.peer_count != count)
      throw ProtocolError("accept_group: inconsistent peer count (" +
                          std::to_string(reg.peer_count) + " vs " + std::to_string(count) + ")");
    if (reg.peer_rank >= count)
      throw ProtocolError("accept_group: peer_rank " + std::to_string(reg.peer_rank) +
                          " out of range for count " + std::to_string(count));
    if (slots[reg.peer_rank].valid())
      throw ProtocolError("accept_group: duplicate peer_rank " + std::to_string(reg.peer_rank));
    slots[reg.peer_rank] = std::move(*conn);
    ++have;
  }

  // The group is complete: ack everyone. Peers treat the ack as the barrier
  // release, so nothing may be sent to them before this point.
  for (auto& s : slots) s.send_frame(encode(RegisterAck{}));

  auto group = std::unique_ptr<SocketGroup>(new SocketGroup(std::move(slots), options));
  group->peer_count_ = count;
  group->start_workers();
  return group;
}

SocketGroup::~SocketGroup() {
  try {
    close();
  } catch (...) {
  }
}

void SocketGroup::start_workers() {
  live_receivers_.store(members_.size(), std::memory_order_release);
  for (size_t i = 0; i < members_.size(); ++i) {
    Member& m = *members_[i];
    m.sender = std::thread([this, &m] { sender_loop(m); });
    m.receiver = std::thread([this, &m, i] { receiver_loop(m, i); });
  }
}

void SocketGroup::send_to(size_t member, Message msg) {
  if (member >= members_.size())
    throw SocketError("send_to: member " + std::to_string(member) + " out of range");
  if (failed_.load(std::memory_order_acquire)) throw SocketError("group failed: " + failure_reason());
  payload_sent_.fetch_add(payload_of(msg), std::memory_order_relaxed);
  if (!members_[member]->outgoing.post(kControlFrameId, std::move(msg)))
    throw SocketError("send_to: group is closed");
}

void SocketGroup::broadcast(const Message& msg) {
  for (size_t i = 0; i < members_.size(); ++i) send_to(i, msg);
}

void SocketGroup::sender_loop(Member& m) {
  while (auto entry = m.outgoing.pop_any()) {
    try {
      m.socket.send_frame(encode(entry->second));
    } catch (const Error& e) {
      fail(e.what());
      return;
    }
  }
  // Outgoing mailbox closed and drained: tell the peer we are done writing.
  try {
    m.socket.shutdown_write();
  } catch (const Error&) {
  }
}

void SocketGroup::receiver_loop(Member& m, size_t index) {
  std::vector<uint8_t> frame;
  for (;;) {
    bool got = false;
    try {
      got = m.socket.recv_frame(frame);
    } catch (const Error& e) {
      if (!closing_.load(std::memory_order_acquire)) fail(e.what());
      break;
    }
    if (!got) break;  // clean end-of-stream
    uint32_t frame_id = kControlFrameId;
    try {
      Message msg = decode(frame);
      if (const auto* tile = std::get_if<Tile>(&msg)) {
        frame_id = tile->header.frame_id;
        payload_received_.fetch_add(tile->payload.size(), std::memory_order_relaxed);
      }
      incoming_.post(frame_id, ReceivedMessage{index, std::move(msg)});
    } catch (const Error& e) {
      fail(e.what());
      break;
    }
  }
  if (live_receivers_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
    // Last receiver out: no more messages can arrive.
    incoming_.close();
    std::lock_guard<std::mutex> lock(drain_mutex_);
    drain_cv_.notify_all();
  }
}

void SocketGroup::fail(const std::string& reason) {
  {
    std::lock_guard<std::mutex> lock(state_mutex_);
    if (!failed_.exchange(true, std::memory_order_acq_rel)) {
      size_t pending = 0;
      for (auto& m : members_) pending += m->outgoing.size();
      failure_reason_ = reason + " (" + std::to_string(pending) + " queued sends dropped)";
      LOG_WARN("socket group failed: %s", failure_reason_.c_str());
    }
  }
  // Unblock everything: senders see closed mailboxes, receivers see reset
  // connections, consumers see end-of-stream.
  for (auto& m : members_) {
    m->outgoing.close();
    try {
      m->socket.shutdown_both();
    } catch (const Error&) {
    }
  }
  incoming_.close();
}

std::string SocketGroup::failure_reason() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return failure_reason_;
}

void SocketGroup::close() {
  {
    std::lock_guard<std::mutex> lock(state_mutex_);
    if (closed_) return;
    closed_ = true;
  }
  closing_.store(true, std::memory_order_release);

  // Flush: closing the outgoing mailboxes lets senders drain remaining
  // messages, then shut down their write sides.
  for (auto& m : members_) m->outgoing.close();
  for (auto& m : members_) {
    if (m->sender.joinable()) m->sender.join();
  }

  // Wait for peers to close their ends; force after the drain timeout.
  {
    std::unique_lock<std::mutex> lock(drain_mutex_);
    bool drained = drain_cv_.wait_for(lock, options_.drain_timeout, [this] {
      return live_receivers_.load(std::memory_order_acquire) == 0;
    });
    if (!drained) {
      LOG_WARN("socket group close: peers did not finish within %lld ms, forcing",
               static_cast<long long>(options_.drain_timeout.count()));
      for (auto& m : members_) {
        try {
          m->socket.shutdown_both();
        } catch (const Error&) {
        }
      }
    }
  }
  for (auto& m : members_) {
    if (m->receiver.joinable()) m->receiver.join();
  }
  incoming_.close();
}

uint64_t SocketGroup::bytes_sent() const {
  uint64_t total = 0;
  for (const auto& m : members_) total += m->socket.bytes_sent();
  return total;
}

uint64_t SocketGroup::bytes_received() const {
  uint64_t total = 0;
  for (const auto& m : members_) total += m->socket.bytes_received();
  return total;
}

}  // namespace dw2
