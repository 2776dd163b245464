// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdint>
#include <random>

#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/log.hpp"

namespace dw2 {
namespace {

constexpr size_t kPoisonConn = SIZE_MAX;

uint64_t random_token() {
  std::random_device rd;
  std::mt19937_64 gen((uint64_t(rd()) << 32) ^ rd());
  uint64_t t = 0;
  while (t == 0) t = gen();
  return t;
}

}  // namespace

Coordinator::Coordinator(WallConfig config, CoordinatorOptions options)
    : config_(std::move(config)),
      token_(options.session_token ? options.session_token : random_token()),
      listener_(config_.coordinator.port) {
  validate_config(config_);
  displays_registered_.assign(config_.display_count(), false);
  pending_frames_.assign(config_.frames_in_flight,
                         std::vector<bool>(config_.display_count(), false));
  pending_counts_.assign(config_.frames_in_flight, 0);
  config_.coordinator.port = listener_.port();
}

Coordinator::~Coordinator() {
  stop();
  join();
}

uint16_t Coordinator::port() const { return listener_.port(); }

Endpoint Coordinator::endpoint() const { return config_.coordinator; }

void Coordinator::start() {
  if (accept_thread_.joinable()) return;
  accept_thread_ = std::thread([this] { accept_loop(); });
  control_thread_ = std::thread([this] { control_loop(); });
}

void Coordinator::stop() {
  if (stopping_.exchange(true)) return;
  listener_.stop();
  events_.post(kControlFrameId, Event{kPoisonConn, std::nullopt});
}

void Coordinator::join() {
  // Control loop joins the accept thread itself; wait for it first so the
  // two never touch accept_thread_ concurrently.
  if (control_thread_.joinable()) control_thread_.join();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::lock_guard<std::mutex> lock(conns_mutex_);
  for (auto& c : conns_) {
    if (c->reader.joinable()) c->reader.join();
  }
}

bool Coordinator::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(idle_mutex_);
  return idle_cv_.wait_for(lock, timeout, [this] { return idle_; });
}

Coordinator::Timeline Coordinator::timeline() const {
  std::lock_guard<std::mutex> lock(stats_mutex_);
  return timeline_;
}

uint32_t Coordinator::frames_completed() const {
  std::lock_guard<std::mutex> lock(stats_mutex_);
  return uint32_t(timeline_.completions.size());
}

uint64_t Coordinator::control_bytes() const {
  std::lock_guard<std::mutex> lock(conns_mutex_);
  uint64_t total = 0;
  for (const auto& c : conns_) total += c->socket.bytes_sent() + c->socket.bytes_received();
  return total;
}

std::string Coordinator::error() const {
  std::lock_guard<std::mutex> lock(stats_mutex_);
  return error_;
}

void Coordinator::accept_loop() {
  for (;;) {
    auto conn = listener_.accept();
    if (!conn) return;  // stopped
    size_t index;
    {
      std::lock_guard<std::mutex> lock(conns_mutex_);
      index = conns_.size();
      auto c = std::make_unique<Conn>();
      c->socket = std::move(*conn);
      conns_.push_back(std::move(c));
      conns_[index]->reader = std::thread([this, index] { reader_loop(index); });
    }
  }
}

void Coordinator::reader_loop(size_t index) {
  Conn* conn;
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    conn = conns_[index].get();
  }
  std::vector<uint8_t> frame;
  for (;;) {
    bool got = false;
    try {
      got = conn->socket.recv_frame(frame);
    } catch (const Error&) {
      break;  // reset mid-frame: same as EOF for control purposes
    }
    if (!got) break;
    try {
      events_.post(kControlFrameId, Event{index, decode(frame)});
    } catch (const Error& e) {
      LOG_WARN("coordinator: dropping undecodable control frame: %s", e.what());
      break;
    }
  }
  events_.post(kControlFrameId, Event{index, std::nullopt});
}

void Coordinator::send_on(size_t index, const Message& msg) {
  Conn* conn;
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    conn = conns_[index].get();
  }
  try {
    conn->socket.send_frame(encode(msg));
  } catch (const Error& e) {
    // The reader on this connection will surface the EOF shortly.
    LOG_DEBUG("coordinator: send to conn %zu failed: %s", index, e.what());
  }
}

void Coordinator::broadcast_clients(const Message& msg) {
  for (const auto& conn_index : client_conns_) {
    if (!conn_index) continue;
    bool open;
    {
      std::lock_guard<std::mutex> lock(conns_mutex_);
      open = conns_[*conn_index]->open;
    }
    if (open) send_on(*conn_index, msg);
  }
}

void Coordinator::issue_token(uint32_t frame_id) {
  broadcast_clients(NextFrameToken{frame_id});
}

InfoReply Coordinator::make_info_reply() const {
  InfoReply reply;
  auto [vw, vh] = virtual_size(config_);
  reply.virtual_width = vw;
  reply.virtual_height = vh;
  reply.mode = config_.mode;
  reply.session_token = token_;
  if (config_.mode == Mode::dispatcher) {
    reply.displays.push_back(InfoReplyEntry{kDispatcherDirectoryId, config_.dispatcher->host,
                                            config_.dispatcher->port, Rect{0, 0, vw, vh}});
  } else {
    for (const auto& d : config_.displays)
      reply.displays.push_back(
          InfoReplyEntry{d.display_id, d.host, d.port, display_region(config_, d.display_id)});
  }
  return reply;
}

void Coordinator::end_session(const char* why) {
  if (session_ended_) return;
  session_ended_ = true;
  LOG_INFO("coordinator: session ended (%s) after %u completed frames", why,
           frames_completed());
  // Unblock clients still waiting for tokens; displays wind down on their
  // own once the client tile connections drain.
  broadcast_clients(Shutdown{});
}

bool Coordinator::idle_now() const {
  return session_ended_ && displays_up_ == 0 && !dispatcher_up_;
}

void Coordinator::control_loop() {
  bool force = false;
  while (auto entry = events_.pop_any()) {
    Event& ev = entry->second;
    if (ev.conn == kPoisonConn) {
      force = true;
      break;
    }
    if (ev.msg)
      handle_message(ev.conn, std::move(*ev.msg));
    else
      handle_eof(ev.conn);
    if (idle_now()) break;
    if (!error().empty() && displays_up_ == 0 && !dispatcher_up_) break;
  }

  if (force) {
    // Forced stop: tell everyone still connected to wind down.
    std::vector<size_t> open;
    {
      std::lock_guard<std::mutex> lock(conns_mutex_);
      for (size_t i = 0; i < conns_.size(); ++i)
        if (conns_[i]->open) open.push_back(i);
    }
    for (size_t i : open) send_on(i, Shutdown{});
    session_ended_ = true;
  }

  listener_.stop();
  if (accept_thread_.joinable()) accept_thread_.join();  // no new connections past here
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    for (auto& c : conns_) {
      try {
        c->socket.shutdown_both();
      } catch (const Error&) {
      }
    }
  }
  events_.close();
  {
    std::lock_guard<std::mutex> lock(idle_mutex_);
    idle_ = true;
  }
  idle_cv_.notify_all();
}

void Coordinator::handle_message(size_t index, Message msg) {
  Conn::Kind kind;
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    kind = conns_[index]->kind;
  }

  if (std::holds_alternative<QueryInfo>(msg)) {
    send_on(index, make_info_reply());
    return;
  }

  if (const auto* reg = std::get_if<Register>(&msg)) {
    auto refuse = [&](const std::string& why) {
      LOG_WARN("coordinator: refusing registration (%s)", why.c_str());
      send_on(index, Shutdown{});
    };
    if (kind != Conn::Kind::unknown) {
      refuse("connection already registered");
      return;
    }
    auto set_kind = [&](Conn::Kind k, uint32_t r) {
      std::lock_guard<std::mutex> lock(conns_mutex_);
      conns_[index]->kind = k;
      conns_[index]->rank = r;
    };

    if (reg->session_token == 0 && reg->peer_rank == kDispatcherRank) {
      if (config_.mode != Mode::dispatcher) return refuse("dispatcher in direct mode");
      if (dispatcher_seen_) return refuse("duplicate dispatcher");
      set_kind(Conn::Kind::dispatcher, reg->peer_rank);
      dispatcher_seen_ = dispatcher_up_ = true;
      send_on(index, RegisterAck{});
      LOG_INFO("coordinator: dispatcher registered");
      return;
    }
    if (reg->session_token == 0) {
      if (reg->peer_rank >= config_.display_count())
        return refuse("display_id " + std::to_string(reg->peer_rank) + " out of range");
      if (displays_registered_[reg->peer_rank])
        return refuse("duplicate display_id " + std::to_string(reg->peer_rank));
      displays_registered_[reg->peer_rank] = true;
      set_kind(Conn::Kind::display, reg->peer_rank);
      ++displays_up_;
      ++displays_seen_;
      send_on(index, RegisterAck{});
      LOG_INFO("coordinator: display %u registered (%zu/%u)", reg->peer_rank, displays_seen_,
               config_.display_count());
      return;
    }
    if (reg->session_token != token_) return refuse("wrong session token");
    // Client registration barrier.
    if (session_started_ || session_ended_) return refuse("session already in progress");
    if (reg->peer_count == 0) return refuse("client peer count 0");
    if (client_count_ == 0) {
      client_count_ = reg->peer_count;
      client_conns_.assign(client_count_, std::nullopt);
    }
    if (reg->peer_count != client_count_)
      return refuse("inconsistent client count " + std::to_string(reg->peer_count));
    if (reg->peer_rank >= client_count_)
      return refuse("client rank " + std::to_string(reg->peer_rank) + " out of range");
    if (client_conns_[reg->peer_rank]) return refuse("duplicate client rank");
    client_conns_[reg->peer_rank] = index;
    set_kind(Conn::Kind::client, reg->peer_rank);
    ++clients_registered_;
    LOG_INFO("coordinator: client rank %u registered (%zu/%u)", reg->peer_rank,
             clients_registered_, client_count_);
    if (clients_registered_ == client_count_) {
      // Barrier release, then prime the frames-in-flight window.
      for (const auto& ci : client_conns_) send_on(*ci, RegisterAck{});
      session_started_ = true;
      {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        timeline_.started = true;
        timeline_.session_start = std::chrono::steady_clock::now();
      }
      for (uint32_t f = 0; f < config_.frames_in_flight; ++f) issue_token(f);
      LOG_INFO("coordinator: session started with %u client(s), %u frame(s) in flight",
               client_count_, config_.frames_in_flight);
    }
    return;
  }

  if (const auto* done = std::get_if<DisplayFrameComplete>(&msg)) {
    if (kind != Conn::Kind::display) {
      LOG_WARN("coordinator: display_frame_complete from non-display connection");
      return;
    }
    if (done->display_id >= config_.display_count()) {
      LOG_WARN("coordinator: completion from out-of-range display %u", done->display_id);
      return;
    }
    const uint32_t f = done->frame_id;
    const uint32_t window = config_.frames_in_flight;
    if (f < lowest_incomplete_ || f >= lowest_incomplete_ + window) {
      LOG_WARN("coordinator: completion for frame %u outside window [%u, %u)", f,
               lowest_incomplete_, lowest_incomplete_ + window);
      return;
    }
    auto& bits = pending_frames_[f % window];
    if (bits[done->display_id]) {
      LOG_WARN("coordinator: duplicate completion of frame %u by display %u", f, done->display_id);
      return;
    }
    bits[done->display_id] = true;
    if (++pending_counts_[f % window] < config_.display_count()) return;

    // Frame f is on every display. Completion is necessarily in frame order:
    // each display reports in order and all must report.
    if (f != lowest_incomplete_)
      LOG_ERROR("coordinator: frame %u completed before frame %u", f, lowest_incomplete_);
    std::fill(bits.begin(), bits.end(), false);
    pending_counts_[f % window] = 0;
    ++lowest_incomplete_;
    {
      std::lock_guard<std::mutex> lock(stats_mutex_);
      timeline_.completions.push_back(std::chrono::steady_clock::now());
    }
    if (!session_ended_) issue_token(f + window);
    return;
  }

  if (std::holds_alternative<Shutdown>(msg)) {
    if (kind == Conn::Kind::client) end_session("client shutdown");
    return;
  }

  LOG_WARN("coordinator: unexpected control message tag %u from conn %zu",
           unsigned(tag_of(msg)), index);
}

void Coordinator::handle_eof(size_t index) {
  Conn::Kind kind;
  uint32_t rank;
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    if (!conns_[index]->open) return;
    conns_[index]->open = false;
    kind = conns_[index]->kind;
    rank = conns_[index]->rank;
  }
  switch (kind) {
    case Conn::Kind::client:
      if (!session_ended_) end_session("client disconnected");
      break;
    case Conn::Kind::display:
      if (displays_up_ > 0) --displays_up_;
      if (!session_ended_) {
        {
          std::lock_guard<std::mutex> lock(stats_mutex_);
          error_ = "display " + std::to_string(rank) + " control connection lost";
        }
        LOG_ERROR("coordinator: display %u control connection lost, shutting down", rank);
        end_session("display lost");
        // Displays tear down via their own control sockets.
        std::vector<size_t> open;
        {
          std::lock_guard<std::mutex> lock(conns_mutex_);
          for (size_t i = 0; i < conns_.size(); ++i)
            if (conns_[i]->open) open.push_back(i);
        }
        for (size_t i : open) send_on(i, Shutdown{});
      }
      break;
    case Conn::Kind::dispatcher:
      dispatcher_up_ = false;
      if (!session_ended_) {
        {
          std::lock_guard<std::mutex> lock(stats_mutex_);
          error_ = "dispatcher control connection lost";
        }
        LOG_ERROR("coordinator: dispatcher control connection lost, shutting down");
        end_session("dispatcher lost");
        std::vector<size_t> open;
        {
          std::lock_guard<std::mutex> lock(conns_mutex_);
          for (size_t i = 0; i < conns_.size(); ++i)
            if (conns_[i]->open) open.push_back(i);
        }
        for (size_t i : open) send_on(i, Shutdown{});
      }
      break;
    case Conn::Kind::unknown:
      break;  // info-only connection
  }
}

}  // namespace dw2
