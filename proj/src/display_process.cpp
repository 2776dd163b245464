// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/log.hpp"

namespace dw2 {
namespace {

unsigned default_decomp_threads() {
  // Leave headroom for the receive and completion threads.
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 3 ? hc - 2 : 1;
}

}  // namespace

DisplayProcess::DisplayProcess(const WallConfig& config, uint32_t display_id, DisplayOptions options)
    : config_(config),
      display_id_(display_id),
      options_(std::move(options)),
      region_(display_region(config, display_id)),
      listener_(config.displays.at(display_id).port),
      sink_(options_.sink ? options_.sink : std::make_shared<NullSink>()),
      framebuffer_(config.display_width, config.display_height) {
  if (options_.decomp_threads == 0) options_.decomp_threads = default_decomp_threads();
}

DisplayProcess::~DisplayProcess() {
  stop();
  join();
}

uint16_t DisplayProcess::data_port() const { return listener_.port(); }

void DisplayProcess::start(const Endpoint& coordinator) {
  if (run_thread_.joinable()) return;
  run_thread_ = std::thread([this, coordinator] { run(coordinator); });
}

void DisplayProcess::stop() {
  if (stopping_.exchange(true)) return;
  listener_.stop();
  completions_.close();
  advance_cv_.notify_all();
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (group_) group_->close();
  if (control_) {
    try {
      control_->shutdown_both();
    } catch (const Error&) {
    }
  }
}

void DisplayProcess::join() {
  if (run_thread_.joinable()) run_thread_.join();
}

bool DisplayProcess::wait_finished(std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(state_mutex_);
  return finished_cv_.wait_for(lock, timeout,
                               [this] { return finished_.load(std::memory_order_acquire); });
}

std::string DisplayProcess::error() const {
  std::lock_guard<std::mutex> lock(state_mutex_);
  return error_;
}

DisplayProcess::Stats DisplayProcess::stats() const {
  Stats s;
  s.tiles_written = tiles_written_.load(std::memory_order_relaxed);
  s.late_tiles = late_tiles_.load(std::memory_order_relaxed);
  s.malformed_tiles = malformed_tiles_.load(std::memory_order_relaxed);
  s.frames_completed = frames_completed_.load(std::memory_order_relaxed);
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (group_) {
    s.payload_bytes = group_->payload_bytes_received();
    s.wire_bytes = group_->bytes_received();
  }
  return s;
}

void DisplayProcess::run(Endpoint coordinator) {
  std::thread ctl_reader;
  std::vector<std::thread> workers;
  std::thread completion;
  try {
    // Bootstrap over the coordinator control plane: learn the session token,
    // then register under our display_id (token 0 marks service peers).
    Socket control = Socket::connect_to(coordinator.host, coordinator.port,
                                        options_.handshake_timeout);
    control.send_frame(encode(QueryInfo{}));
    std::vector<uint8_t> frame;
    auto got = control.recv_frame_for(frame, options_.handshake_timeout);
    if (!got || !*got) throw SocketError("display: no info reply from coordinator");
    Message info_msg = decode(frame);
    auto* reply = std::get_if<InfoReply>(&info_msg);
    if (!reply) throw ProtocolError("display: expected info_reply from coordinator");
    const uint64_t token = reply->session_token;

    control.send_frame(encode(Register{0, display_id_, config_.display_count()}));
    got = control.recv_frame_for(frame, options_.handshake_timeout);
    if (!got || !*got) throw SocketError("display: no register ack from coordinator");
    Message ack = decode(frame);
    if (std::holds_alternative<Shutdown>(ack))
      throw SessionError("display: registration refused by coordinator");
    if (!std::holds_alternative<RegisterAck>(ack))
      throw ProtocolError("display: expected register_ack from coordinator");

    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      control_ = std::move(control);
    }
    ctl_reader = std::thread([this] { control_reader(*control_); });

    // Tile plane: every client (or the dispatcher alone) registers here.
    auto group = SocketGroup::accept_group(listener_, token, 0,
                                           {options_.handshake_timeout});
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      group_ = std::move(group);
    }
    LOG_INFO("display %u: tile group up (%u peer(s))", display_id_, group_->peer_count());

    completion = std::thread([this] { completion_worker(*control_); });
    for (unsigned i = 0; i < options_.decomp_threads; ++i)
      workers.emplace_back([this] { decomp_worker(); });
    for (auto& w : workers) w.join();
    workers.clear();

    // Tile stream ended. Completions already posted still flush (the frames
    // they describe finished assembling); an uncovered current frame is
    // dropped by design.
    completions_.close();
    completion.join();
    group_->close();
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
      LOG_ERROR("display %u: %s", display_id_, e.what());
      std::lock_guard<std::mutex> lock(state_mutex_);
      error_ = e.what();
    }
    // Unwind whatever came up before the failure.
    completions_.close();
    {
      std::lock_guard<std::mutex> lock(state_mutex_);
      if (group_) group_->close();
      if (control_) {
        try {
          control_->shutdown_both();
        } catch (const Error&) {
        }
      }
    }
    for (auto& w : workers) w.join();
    if (completion.joinable()) completion.join();
    if (ctl_reader.joinable()) ctl_reader.join();
  }
  finished_.store(true, std::memory_order_release);
  {
    // Pair the store with the mutex so wait_finished can't miss the wakeup.
    std::lock_guard<std::mutex> lock(state_mutex_);
  }
  finished_cv_.notify_all();
  LOG_INFO("display %u: done (%llu frames)", display_id_,
           (unsigned long long)frames_completed_.load());
}

void DisplayProcess::control_reader(Socket& control) {
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
      LOG_WARN("display %u: bad control frame: %s", display_id_, e.what());
      break;
    }
    if (std::holds_alternative<Shutdown>(msg)) {
      LOG_INFO("display %u: shutdown requested by coordinator", display_id_);
      initiate_stop();
      break;
    }
    // Tokens and the like are client-facing; nothing else reaches displays.
  }
  if (!stopping_.load(std::memory_order_acquire) && !finished_.load(std::memory_order_acquire))
    LOG_DEBUG("display %u: coordinator control connection closed", display_id_);
}

void DisplayProcess::initiate_stop() {
  if (stopping_.exchange(true)) return;
  listener_.stop();
  completions_.close();
  advance_cv_.notify_all();
  std::lock_guard<std::mutex> lock(state_mutex_);
  if (group_) group_->close();
}

void DisplayProcess::decomp_worker() {
  auto& incoming = group_->incoming();
  for (;;) {
    // Admit control traffic, the current frame, and anything older (late
    // tiles are popped so they don't pin the queue; they are discarded
    // below). Tiles for future frames wait their turn.
    auto entry = incoming.pop_matching([this](uint32_t fid) {
      return fid == kControlFrameId || fid <= current_frame_.load(std::memory_order_acquire);
    });
    if (!entry) {
      // Stream closed and nothing currently eligible. Tiles queued for later
      // frames become eligible once the completion worker advances the frame
      // gate, so wait for that instead of dropping a fully-received frame.
      if (stopping_.load(std::memory_order_acquire)) return;
      if (incoming.size() == 0) return;  // fully drained
      std::unique_lock<std::mutex> lock(advance_mutex_);
      const uint32_t gate = current_frame_.load(std::memory_order_acquire);
      advance_cv_.wait_for(lock, std::chrono::milliseconds(50), [&] {
        return current_frame_.load(std::memory_order_acquire) != gate ||
               stopping_.load(std::memory_order_acquire);
      });
      if (current_frame_.load(std::memory_order_acquire) == gate &&
          busy_workers_.load(std::memory_order_acquire) == 0 &&
          completions_inflight_.load(std::memory_order_acquire) == 0) {
        // No write is in progress and no completion is pending, so the gate
        // frame can never complete: the queued remainder is undeliverable.
        LOG_DEBUG("display %u: dropping %zu tile(s) past an incomplete frame", display_id_,
                  incoming.size());
        return;
      }
      continue;
    }
    busy_workers_.fetch_add(1, std::memory_order_acq_rel);
    struct BusyGuard {
      std::atomic<uint32_t>& count;
      ~BusyGuard() { count.fetch_sub(1, std::memory_order_acq_rel); }
    } busy_guard{busy_workers_};
    auto* tile = std::get_if<Tile>(&entry->second.msg);
    if (!tile) {
      LOG_DEBUG("display %u: ignoring non-tile message on tile plane (tag %u)", display_id_,
                unsigned(tag_of(entry->second.msg)));
      continue;
    }
    const TileHeader header = tile->header;
    if (header.frame_id < current_frame_.load(std::memory_order_acquire)) {
      late_tiles_.fetch_add(1, std::memory_order_relaxed);
      continue;
    }

    PixelBuffer pixels;
    try {
      pixels = decompress(header.codec, tile->payload, header.width, header.height);
    } catch (const Error& e) {
      malformed_tiles_.fetch_add(1, std::memory_order_relaxed);
      LOG_WARN("display %u: dropping malformed tile (frame %u at %u,%u): %s", display_id_,
               header.frame_id, header.x, header.y, e.what());
      continue;
    }

    bool completed = false;
    {
      std::lock_guard<std::mutex> lock(fb_mutex_);
      // The frame may have completed while we were decompressing.
      if (header.frame_id != current_frame_.load(std::memory_order_relaxed)) {
        late_tiles_.fetch_add(1, std::memory_order_relaxed);
        continue;
      }
      framebuffer_.write_tile(int64_t(header.x) - region_.x, int64_t(header.y) - region_.y,
                              pixels);
      tiles_written_.fetch_add(1, std::memory_order_relaxed);
      if (framebuffer_.complete() && !current_complete_) {
        current_complete_ = true;
        completed = true;
        // Raised before the busy count drops so the drain logic above never
        // observes "idle with nothing pending" between write and post.
        completions_inflight_.fetch_add(1, std::memory_order_acq_rel);
      }
    }
    if (completed) completions_.post(header.frame_id, header.frame_id);
  }
}

void DisplayProcess::completion_worker(Socket& control) {
  while (auto entry = completions_.pop_any()) {
    const uint32_t frame_id = entry->second;
    // Report first (the coordinator clock measures display latency), then
    // hand the frame to the sink, then admit the next frame's tiles.
    try {
      control.send_frame(encode(DisplayFrameComplete{frame_id, display_id_}));
    } catch (const Error& e) {
      if (!stopping_.load(std::memory_order_acquire))
        LOG_WARN("display %u: completion report failed: %s", display_id_, e.what());
    }
    PixelBuffer snapshot;
    {
      std::lock_guard<std::mutex> lock(fb_mutex_);
      snapshot = framebuffer_.pixels();
    }
    try {
      sink_->frame_complete(display_id_, frame_id, snapshot);
    } catch (const std::exception& e) {
      LOG_ERROR("display %u: sink failed for frame %u: %s", display_id_, frame_id, e.what());
    }
    {
      std::lock_guard<std::mutex> lock(fb_mutex_);
      framebuffer_.reset_coverage();
      current_complete_ = false;
      current_frame_.store(frame_id + 1, std::memory_order_release);
    }
    frames_completed_.fetch_add(1, std::memory_order_relaxed);
    completions_inflight_.fetch_sub(1, std::memory_order_acq_rel);
    {
      std::lock_guard<std::mutex> lock(advance_mutex_);
    }
    advance_cv_.notify_all();
    group_->incoming().notify_all();  // wake workers filtered on current_frame_
  }
}

}  // namespace dw2
