// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/log.hpp"

namespace dw2 {

Dispatcher::Dispatcher(const WallConfig& config, DispatcherOptions options)
    : config_(config),
      options_(options),
      listener_(config.dispatcher ? config.dispatcher->port : 0) {
  if (config_.mode != Mode::dispatcher)
    throw ConfigError("dispatcher: config mode is not dispatcher");
}

Dispatcher::~Dispatcher() {
  stop();
  join();
}

uint16_t Dispatcher::port() const { return listener_.port(); }

void Dispatcher::start(const Endpoint& coordinator) {
  if (run_thread_.joinable()) return;
  run_thread_ = std::thread([this, coordinator] { run(coordinator); });
}

void Dispatcher::stop() {
  if (stopping_.exchange(true)) return;
  listener_.stop();
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (clients_) clients_->close();
  if (displays_) displays_->close();
  if (control_) {
    try {
      control_->shutdown_both();
    } catch (const Error&) {
    }
  }
}

void Dispatcher::join() {
  if (run_thread_.joinable()) run_thread_.join();
}

bool Dispatcher::wait_finished(std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(state_mutex_);
  return finished_cv_.wait_for(lock, timeout,
                               [this] { return finished_.load(std::memory_order_acquire); });
}

std::string Dispatcher::error() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return error_;
}

Dispatcher::Stats Dispatcher::stats() const {
  Stats s;
  s.tiles_in = tiles_in_.load(std::memory_order_relaxed);
  s.tiles_dropped = tiles_dropped_.load(std::memory_order_relaxed);
  s.forwarded_sends = forwarded_sends_.load(std::memory_order_relaxed);
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (clients_) s.payload_bytes_in = clients_->payload_bytes_received();
  if (displays_) s.payload_bytes_out = displays_->payload_bytes_sent();
  return s;
}

void Dispatcher::run(Endpoint coordinator) {
  std::thread ctl_reader;
  try {
    Socket control = Socket::connect_to(coordinator.host, coordinator.port,
                                        options_.handshake_timeout);
    control.send_frame(encode(QueryInfo{}));
    std::vector<uint8_t> frame;
    auto got = control.recv_frame_for(frame, options_.handshake_timeout);
    if (!got || !*got) throw SocketError("dispatcher: no info reply from coordinator");
    Message info_msg = decode(frame);
    auto* reply = std::get_if<InfoReply>(&info_msg);
    if (!reply) throw ProtocolError("dispatcher: expected info_reply from coordinator");
    const uint64_t token = reply->session_token;

    control.send_frame(encode(Register{0, kDispatcherRank, 1}));
    got = control.recv_frame_for(frame, options_.handshake_timeout);
    if (!got || !*got) throw SocketError("dispatcher: no register ack from coordinator");
    Message ack = decode(frame);
    if (!std::holds_alternative<RegisterAck>(ack))
      throw SessionError("dispatcher: registration refused by coordinator");

    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      control_ = std::move(control);
    }
    ctl_reader = std::thread([this] { control_reader(*control_); });

    // Join every display's tile group as its only peer, then accept the
    // clients. Member index == display_id (displays are id-ordered).
    std::vector<Endpoint> display_eps;
    for (const auto& d : config_.displays) display_eps.push_back(Endpoint{d.host, d.port});
    auto displays = SocketGroup::connect_group(display_eps, token, 0, 1,
                                               {options_.handshake_timeout});
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      displays_ = std::move(displays);
    }
    auto clients = SocketGroup::accept_group(listener_, token, 0,
                                             {options_.handshake_timeout});
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      clients_ = std::move(clients);
    }
    LOG_INFO("dispatcher: forwarding for %u client(s) across %zu display(s)",
             clients_->peer_count(), display_eps.size());

    // Route by the uncompressed header only; payloads are forwarded as-is.
    while (auto entry = clients_->incoming().pop_any()) {
      auto* tile = std::get_if<Tile>(&entry->second.msg);
      if (!tile) {
        LOG_DEBUG("dispatcher: ignoring non-tile message (tag %u)",
                  unsigned(tag_of(entry->second.msg)));
        continue;
      }
      tiles_in_.fetch_add(1, std::memory_order_relaxed);
      std::vector<std::pair<uint32_t, Rect>> targets;
      try {
        targets = route_rect(config_, tile->header.rect());
      } catch (const std::out_of_range& e) {
        tiles_dropped_.fetch_add(1, std::memory_order_relaxed);
        LOG_WARN("dispatcher: dropping out-of-bounds tile: %s", e.what());
        continue;
      }
      if (targets.empty()) {  // bezel-only
        tiles_dropped_.fetch_add(1, std::memory_order_relaxed);
        continue;
      }
      forwarded_sends_.fetch_add(targets.size(), std::memory_order_relaxed);
      for (size_t i = 0; i + 1 < targets.size(); ++i)
        displays_->send_to(targets[i].first, *tile);
      displays_->send_to(targets.back().first, std::move(*tile));
    }

    // Client side drained: flush toward the displays, then drop control.
    displays_->close();
    clients_->close();
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      try {
        control_->shutdown_both();
      } catch (const Error&) {
      }
    }
    ctl_reader.join();
  } catch (const std::exception& e) {
    if (!stopping_.load(std::memory_order_acquire)) {
      LOG_ERROR("dispatcher: %s", e.what());
      std::lock_guard<std::mutex> lock(state_mutex_);
      error_ = e.what();
    }
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      if (clients_) clients_->close();
      if (displays_) displays_->close();
      if (control_) {
        try {
          control_->shutdown_both();
        } catch (const Error&) {
        }
      }
    }
    if (ctl_reader.joinable()) ctl_reader.join();
  }
  finished_.store(true, std::memory_order_release);
  {
    // Pair the store with the mutex so wait_finished can't miss the wakeup.
    std::lock_guard<std::mutex> lock(state_mutex_);
  }
  finished_cv_.notify_all();
  LOG_INFO("dispatcher: done (%llu tiles in, %llu forwards)",
           (unsigned long long)tiles_in_.load(), (unsigned long long)forwarded_sends_.load());
}

void Dispatcher::control_reader(Socket& control) {
  std::vector<uint8_t> frame;
  for (;;) {
    bool got = false;
    try {
      got = control.recv_frame(frame);
    } catch (const Error&) {
      break;
    }
    if (!got) break;
    Message msg;
    try {
      msg = decode(frame);
    } catch (const Error& e) {
      LOG_WARN("dispatcher: bad control frame: %s", e.what());
      break;
    }
    if (std::holds_alternative<Shutdown>(msg)) {
      LOG_INFO("dispatcher: shutdown requested by coordinator");
      initiate_stop();
      break;
    }
  }
}

void Dispatcher::initiate_stop() {
  if (stopping_.exchange(true)) return;
  listener_.stop();
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (clients_) clients_->close();
  if (displays_) displays_->close();
}

}  // namespace dw2
