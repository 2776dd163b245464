// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "dw2/codec.hpp"
#include "dw2/mailbox.hpp"
#include "dw2/protocol.hpp"
#include "dw2/socket_group.hpp"
#include "dw2/wall_config.hpp"

namespace dw2 {

/// What a client learns from the coordinator before connecting: virtual
/// framebuffer extent, mode, session token, and the data-plane directory
/// (per-display regions in direct mode, the lone dispatcher endpoint
/// otherwise).
struct WallInfo {
  Endpoint coordinator;
  uint32_t virtual_width = 0;
  uint32_t virtual_height = 0;
  Mode mode = Mode::direct;
  uint64_t session_token = 0;
  std::vector<InfoReplyEntry> displays;
};

/// One-shot QueryInfo round trip on a fresh connection.
WallInfo query_info(const Endpoint& coordinator,
                    std::chrono::milliseconds timeout = std::chrono::seconds(30));

/// A sender's connection to the wall. Mode-transparent: send_rgba either
/// routes tiles to the overlapped displays (direct) or hands everything to
/// the dispatcher; the caller cannot tell the difference.
///
/// Pacing: begin_frame blocks until the coordinator issues the next frame
/// token, which it does frames_in_flight frames ahead of the last completed
/// one. Tiles are compressed and sent by a small worker pool; send_rgba only
/// blocks when max_inflight_tiles submissions are already queued.
struct ClientOptions {
  int quality = 75;  // kRawQuality sends raw RGBA
  unsigned compress_threads = 2;
  unsigned max_inflight_tiles = 64;
  std::chrono::milliseconds handshake_timeout = std::chrono::seconds(30);
};

class ClientSession {
 public:
  /// Register with the coordinator (blocks until every peer registered) and
  /// join the data plane. peer_rank in [0, peer_count).
  static std::unique_ptr<ClientSession> connect(const WallInfo& info, uint32_t peer_rank,
                                                uint32_t peer_count, ClientOptions options = {});

  ~ClientSession();  // disconnects
  ClientSession(const ClientSession&) = delete;
  ClientSession& operator=(const ClientSession&) = delete;

  /// Next frame id to render. Strictly increasing. Throws SessionError once
  /// the session is over (coordinator sent Shutdown or went away).
  uint32_t begin_frame();

  /// begin_frame with a deadline: nullopt when no token arrived in time
  /// (the frames-in-flight window is exhausted). Throws like begin_frame.
  std::optional<uint32_t> try_begin_frame(std::chrono::milliseconds timeout);

  /// Queue one tile of the given frame; (x, y) is the tile's origin in
  /// virtual coordinates. The frame must have been admitted by begin_frame
  /// and the tile must lie inside the virtual framebuffer.
  void send_rgba(uint32_t frame_id, PixelBuffer pixels, uint32_t x, uint32_t y);

  /// Flush queued tiles, leave the session (the coordinator ends it), and
  /// tear down. Idempotent; the destructor calls it.
  void disconnect();

  uint32_t virtual_width() const { return info_.virtual_width; }
  uint32_t virtual_height() const { return info_.virtual_height; }
  Mode mode() const { return info_.mode; }

  struct Stats {
    uint64_t tiles_submitted = 0;
    uint64_t tile_sends = 0;      // socket-level sends (>= submitted - dropped in direct mode)
    uint64_t bezel_dropped = 0;   // tiles entirely inside bezel strips
    uint64_t raw_bytes = 0;       // RGBA bytes submitted
    uint64_t payload_bytes = 0;   // compressed bytes handed to the transport
    uint64_t wire_bytes = 0;      // data-plane bytes on the wire
  };
  Stats stats() const;

 private:
  struct PendingTile {
    uint32_t frame_id = 0;
    uint32_t x = 0;
    uint32_t y = 0;
    PixelBuffer pixels;
  };

  ClientSession(WallInfo info, ClientOptions options);
  void control_reader();
  void compress_worker();
  void route_and_send(Tile tile);
  uint32_t admit(uint32_t frame_id);

  WallInfo info_;
  ClientOptions options_;
  Socket control_;
  std::thread control_thread_;
  std::mutex control_done_mutex_;
  std::condition_variable control_done_cv_;
  bool control_done_ = false;  // control reader exited (session end seen)
  std::shared_ptr<SocketGroup> group_;

  TimestampedMailbox<uint32_t> tokens_;
  TimestampedMailbox<PendingTile> pending_;
  std::vector<std::thread> workers_;
  std::counting_semaphore<> inflight_;
  std::atomic<uint32_t> admitted_{0};  // frames with id < admitted_ may send
  std::atomic<bool> closed_{false};
  std::mutex disconnect_mutex_;

  std::atomic<uint64_t> tiles_submitted_{0};
  std::atomic<uint64_t> tile_sends_{0};
  std::atomic<uint64_t> bezel_dropped_{0};
  std::atomic<uint64_t> raw_bytes_{0};
};

}  // namespace dw2
