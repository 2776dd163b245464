// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/client.hpp"

#include <algorithm>
#include <stdexcept>

#include "dw2/error.hpp"
#include "dw2/log.hpp"

namespace dw2 {

WallInfo query_info(const Endpoint& coordinator, std::chrono::milliseconds timeout) {
  Socket s = Socket::connect_to(coordinator.host, coordinator.port, timeout);
  s.send_frame(encode(QueryInfo{}));
  std::vector<uint8_t> frame;
  auto got = s.recv_frame_for(frame, timeout);
  if (!got) throw SocketError("query_info: timed out");
  if (!*got) throw SocketError("query_info: connection closed");
  Message msg = decode(frame);
  auto* reply = std::get_if<InfoReply>(&msg);
  if (!reply) throw ProtocolError("query_info: expected info_reply");

  WallInfo info;
  info.coordinator = coordinator;
  info.virtual_width = reply->virtual_width;
  info.virtual_height = reply->virtual_height;
  info.mode = reply->mode;
  info.session_token = reply->session_token;
  info.displays = std::move(reply->displays);
  return info;
}

ClientSession::ClientSession(WallInfo info, ClientOptions options)
    : info_(std::move(info)),
      options_(options),
      inflight_(std::max(1u, options.max_inflight_tiles)) {}

std::unique_ptr<ClientSession> ClientSession::connect(const WallInfo& info, uint32_t peer_rank,
                                                      uint32_t peer_count, ClientOptions options) {
  if (peer_count == 0 || peer_rank >= peer_count)
    throw std::invalid_argument("client: peer_rank must be < peer_count");
  if (options.quality != kRawQuality && (options.quality < 1 || options.quality > 100))
    throw std::invalid_argument("client: quality must be 0 (raw) or 1..100");
  if (info.displays.empty()) throw SessionError("client: directory is empty");

  auto session = std::unique_ptr<ClientSession>(new ClientSession(info, options));

  // Control plane: register and wait in the all-clients barrier.
  session->control_ = Socket::connect_to(info.coordinator.host, info.coordinator.port,
                                         options.handshake_timeout);
  session->control_.send_frame(
      encode(Register{info.session_token, peer_rank, peer_count}));
  std::vector<uint8_t> frame;
  auto got = session->control_.recv_frame_for(frame, options.handshake_timeout);
  if (!got) throw SocketError("client: timed out waiting for registration ack");
  if (!*got) throw SocketError("client: coordinator closed during registration");
  Message ack = decode(frame);
  if (std::holds_alternative<Shutdown>(ack))
    throw SessionError("client: registration refused (token or session state)");
  if (!std::holds_alternative<RegisterAck>(ack))
    throw ProtocolError("client: expected register_ack");

  // Data plane: one group over all displays (direct) or the dispatcher.
  std::vector<Endpoint> endpoints;
  for (const auto& d : session->info_.displays)
    endpoints.push_back(Endpoint{d.host, d.port});
  session->group_ = SocketGroup::connect_group(endpoints, info.session_token, peer_rank,
                                               peer_count, {options.handshake_timeout});

  session->control_thread_ = std::thread([s = session.get()] { s->control_reader(); });
  unsigned workers = std::max(1u, options.compress_threads);
  for (unsigned i = 0; i < workers; ++i)
    session->workers_.emplace_back([s = session.get()] { s->compress_worker(); });
  return session;
}

ClientSession::~ClientSession() {
  try {
    disconnect();
  } catch (...) {
  }
}

void ClientSession::control_reader() {
  std::vector<uint8_t> frame;
  for (;;) {
    bool got = false;
    try {
      got = control_.recv_frame(frame);
    } catch (const Error&) {
      break;
    }
    if (!got) break;
    Message msg;
    try {
      msg = decode(frame);
    } catch (const Error& e) {
      LOG_WARN("client: bad control frame: %s", e.what());
      break;
    }
    if (const auto* token = std::get_if<NextFrameToken>(&msg)) {
      tokens_.post(token->frame_id, token->frame_id);
      continue;
    }
    if (std::holds_alternative<Shutdown>(msg)) break;
    LOG_DEBUG("client: ignoring control message tag %u", unsigned(tag_of(msg)));
  }
  {
    std::lock_guard<std::mutex> lock(control_done_mutex_);
    control_done_ = true;
  }
  control_done_cv_.notify_all();
  // No more tokens can arrive; unblock begin_frame.
  tokens_.close();
}

uint32_t ClientSession::begin_frame() {
  if (closed_.load(std::memory_order_acquire)) throw SessionError("client: session closed");
  auto entry = tokens_.pop_any();
  if (!entry) throw SessionError("client: session over (no further frame tokens)");
  return admit(entry->second);
}

std::optional<uint32_t> ClientSession::try_begin_frame(std::chrono::milliseconds timeout) {
  if (closed_.load(std::memory_order_acquire)) throw SessionError("client: session closed");
  auto entry = tokens_.pop_any_for(timeout);
  if (!entry) {
    if (tokens_.closed()) throw SessionError("client: session over (no further frame tokens)");
    return std::nullopt;
  }
  return admit(entry->second);
}

uint32_t ClientSession::admit(uint32_t frame_id) {
  // Tokens arrive in issue order; admit everything up to this frame.
  uint32_t seen = admitted_.load(std::memory_order_relaxed);
  while (seen < frame_id + 1 &&
         !admitted_.compare_exchange_weak(seen, frame_id + 1, std::memory_order_release)) {
  }
  return frame_id;
}

void ClientSession::send_rgba(uint32_t frame_id, PixelBuffer pixels, uint32_t x, uint32_t y) {
  if (closed_.load(std::memory_order_acquire)) throw SessionError("client: session closed");
  if (pixels.width == 0 || pixels.height == 0)
    throw std::invalid_argument("send_rgba: empty tile");
  if (pixels.pixels.size() != pixels.byte_size())
    throw std::invalid_argument("send_rgba: pixel buffer size mismatch");
  if (uint64_t(x) + pixels.width > info_.virtual_width ||
      uint64_t(y) + pixels.height > info_.virtual_height)
    throw std::out_of_range("send_rgba: tile exceeds the virtual framebuffer");
  if (frame_id >= admitted_.load(std::memory_order_acquire))
    throw SessionError("send_rgba: frame " + std::to_string(frame_id) + " not begun");

  inflight_.acquire();
  tiles_submitted_.fetch_add(1, std::memory_order_relaxed);
  raw_bytes_.fetch_add(pixels.byte_size(), std::memory_order_relaxed);
  if (!pending_.post(frame_id, PendingTile{frame_id, x, y, std::move(pixels)})) {
    inflight_.release();
    throw SessionError("send_rgba: session closed");
  }
}

void ClientSession::compress_worker() {
  while (auto entry = pending_.pop_any()) {
    PendingTile t = std::move(entry->second);
    Tile tile;
    try {
      Compressed c = compress(t.pixels, options_.quality);
      tile.header = TileHeader{t.frame_id, t.x,      t.y,
                               t.pixels.width,       t.pixels.height,
                               c.codec,              uint32_t(c.payload.size())};
      tile.payload = std::move(c.payload);
    } catch (const Error& e) {
      LOG_ERROR("client: tile compression failed: %s", e.what());
      inflight_.release();
      continue;
    }
    try {
      route_and_send(std::move(tile));
    } catch (const Error& e) {
      if (!closed_.load(std::memory_order_acquire))
        LOG_WARN("client: tile send failed: %s", e.what());
    }
    inflight_.release();
  }
}

void ClientSession::route_and_send(Tile tile) {
  if (info_.mode == Mode::dispatcher) {
    group_->send_to(0, std::move(tile));
    tile_sends_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  // Direct mode: the directory order defines group member order, so member i
  // serves info_.displays[i]. Send to every display the tile overlaps.
  const Rect r = tile.header.rect();
  std::vector<size_t> targets;
  for (size_t i = 0; i < info_.displays.size(); ++i) {
    if (!intersect(r, info_.displays[i].region).empty()) targets.push_back(i);
  }
  if (targets.empty()) {
    bezel_dropped_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  tile_sends_.fetch_add(targets.size(), std::memory_order_relaxed);
  for (size_t i = 0; i + 1 < targets.size(); ++i) group_->send_to(targets[i], tile);
  group_->send_to(targets.back(), std::move(tile));
}

void ClientSession::disconnect() {
  {
    std::lock_guard<std::mutex> lock(disconnect_mutex_);
    if (closed_.exchange(true, std::memory_order_acq_rel)) return;
  }
  // Flush queued tiles before touching the transport: drain semantics on the
  // pending mailbox mean the workers finish everything already submitted.
  pending_.close();
  for (auto& w : workers_) w.join();
  workers_.clear();

  // Tell the coordinator we are leaving before the data plane goes down:
  // closing the group makes the displays drain and drop their own control
  // connections, and the coordinator must already know the session ended by
  // then or it would diagnose a display loss.
  try {
    control_.send_frame(encode(Shutdown{}));
  } catch (const Error&) {
  }
  // Sending is not enough: the coordinator answers the departure with its
  // own Shutdown, and only once our reader has seen it (or the connection
  // died) is the session provably over on the coordinator's side. Without
  // this wait a display EOF could be queued ahead of our unread Shutdown
  // and be misread as a display loss.
  if (control_thread_.joinable()) {
    std::unique_lock<std::mutex> lock(control_done_mutex_);
    control_done_cv_.wait_for(lock, options_.handshake_timeout,
                              [this] { return control_done_; });
  }
  if (group_) group_->close();
  try {
    control_.shutdown_both();
  } catch (const Error&) {
  }
  if (control_thread_.joinable()) control_thread_.join();
  tokens_.close();
  LOG_INFO("client: disconnected (%llu tiles submitted, %llu sends)",
           (unsigned long long)tiles_submitted_.load(), (unsigned long long)tile_sends_.load());
}

ClientSession::Stats ClientSession::stats() const {
  Stats s;
  s.tiles_submitted = tiles_submitted_.load(std::memory_order_relaxed);
  s.tile_sends = tile_sends_.load(std::memory_order_relaxed);
  s.bezel_dropped = bezel_dropped_.load(std::memory_order_relaxed);
  s.raw_bytes = raw_bytes_.load(std::memory_order_relaxed);
  if (group_) {
    s.payload_bytes = group_->payload_bytes_sent();
    s.wire_bytes = group_->bytes_sent();
  }
  return s;
}

}  // namespace dw2
