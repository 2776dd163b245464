// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dw2/frame_state.hpp"
#include "dw2/mailbox.hpp"
#include "dw2/protocol.hpp"
#include "dw2/sink.hpp"
#include "dw2/socket_group.hpp"
#include "dw2/wall_config.hpp"

namespace dw2 {

/// The wall's control plane. Owns the session token, answers QueryInfo with
/// the directory, runs the client registration barrier, and drives the
/// frames-in-flight window: NextFrameToken f+window is broadcast when every
/// display reported frame f complete. One coordinator serves one session;
/// the session ends when the first client disconnects, and the coordinator
/// goes idle once every display closed its control connection.
///
/// All protocol state lives on a single control thread fed by per-connection
/// reader threads, so there is no locking on the session state itself.
struct CoordinatorOptions {
  uint64_t session_token = 0;  // 0 picks a random nonzero token
};

class Coordinator {
 public:
  /// Binds the control listener (config.coordinator.port; 0 = ephemeral).
  explicit Coordinator(WallConfig config, CoordinatorOptions options = {});
  ~Coordinator();

  void start();
  /// Broadcast Shutdown to every open connection and wind down. Idempotent.
  void stop();
  void join();

  uint16_t port() const;
  Endpoint endpoint() const;
  uint64_t session_token() const { return token_; }
  const WallConfig& config() const { return config_; }

  /// True once the session ended and every display/dispatcher control
  /// connection closed (or immediately if no session ever started and stop()
  /// was called). False on timeout.
  bool wait_idle(std::chrono::milliseconds timeout);

  /// Completion instants recorded on the control thread; index = frame id.
  /// session_start is when the first batch of tokens was issued.
  struct Timeline {
    bool started = false;
    std::chrono::steady_clock::time_point session_start{};
    std::vector<std::chrono::steady_clock::time_point> completions;
  };
  Timeline timeline() const;
  uint32_t frames_completed() const;

  /// Bytes over all control connections, both directions.
  uint64_t control_bytes() const;

  /// Non-empty if the session was torn down abnormally (e.g. a display
  /// connection dropped mid-session).
  std::string error() const;

 private:
  struct Conn {
    enum class Kind { unknown, display, dispatcher, client } kind = Kind::unknown;
    uint32_t rank = 0;  // display_id / client peer_rank once registered
    Socket socket;
    std::thread reader;
    bool open = true;
  };
  // conn index + message; nullopt message = connection closed.
  struct Event {
    size_t conn;
    std::optional<Message> msg;
  };

  void accept_loop();
  void reader_loop(size_t index);
  void control_loop();
  void handle_message(size_t index, Message msg);
  void handle_eof(size_t index);
  void send_on(size_t index, const Message& msg);
  void broadcast_clients(const Message& msg);
  void issue_token(uint32_t frame_id);
  void end_session(const char* why);
  InfoReply make_info_reply() const;
  bool idle_now() const;

  WallConfig config_;
  uint64_t token_ = 0;
  Listener listener_;

  std::thread accept_thread_;
  std::thread control_thread_;
  TimestampedMailbox<Event> events_;

  mutable std::mutex conns_mutex_;
  std::vector<std::unique_ptr<Conn>> conns_;  // never erased; Kind::unknown until registered

  // Session state, control thread only.
  std::vector<bool> displays_registered_;
  size_t displays_up_ = 0;       // registered and still connected
  size_t displays_seen_ = 0;     // ever registered
  bool dispatcher_up_ = false;
  bool dispatcher_seen_ = false;
  uint32_t client_count_ = 0;    // learned from the first client Register
  size_t clients_registered_ = 0;
  std::vector<std::optional<size_t>> client_conns_;  // rank -> conn index
  bool session_started_ = false;
  bool session_ended_ = false;
  uint32_t next_frame_to_issue_ = 0;
  std::vector<std::vector<bool>> pending_frames_;  // ring keyed by frame id
  std::vector<uint32_t> pending_counts_;
  uint32_t lowest_incomplete_ = 0;

  mutable std::mutex stats_mutex_;
  Timeline timeline_;
  std::string error_;

  std::atomic<bool> stopping_{false};
  std::mutex idle_mutex_;
  std::condition_variable idle_cv_;
  bool idle_ = false;
};

/// One display of the wall: accepts the client (or dispatcher) tile group,
/// decompresses on a small worker pool, assembles frames, and reports
/// completion to the coordinator. The session token is learned over the
/// coordinator control connection (QueryInfo, then Register with token 0 and
/// peer_rank = display_id).
struct DisplayOptions {
  unsigned decomp_threads = 0;  // 0 = all hardware threads minus two, at least one
  std::chrono::milliseconds handshake_timeout = std::chrono::seconds(30);
  std::shared_ptr<FrameSink> sink;  // nullptr = NullSink
};

class DisplayProcess {
 public:
  /// Binds the tile listener (config port for this display; 0 = ephemeral).
  DisplayProcess(const WallConfig& config, uint32_t display_id, DisplayOptions options = {});
  ~DisplayProcess();

  uint16_t data_port() const;
  uint32_t display_id() const { return display_id_; }

  void start(const Endpoint& coordinator);
  void stop();  // force teardown; idempotent
  void join();

  bool finished() const { return finished_.load(std::memory_order_acquire); }
  bool wait_finished(std::chrono::milliseconds timeout);
  std::string error() const;

  struct Stats {
    uint64_t tiles_written = 0;
    uint64_t late_tiles = 0;       // arrived for an already-completed frame
    uint64_t malformed_tiles = 0;  // failed to decode
    uint64_t frames_completed = 0;
    uint64_t payload_bytes = 0;  // compressed tile payload received
    uint64_t wire_bytes = 0;     // everything received on the tile plane
  };
  Stats stats() const;

 private:
  void run(Endpoint coordinator);
  void control_reader(Socket& control);
  void decomp_worker();
  void completion_worker(Socket& control);
  void initiate_stop();

  WallConfig config_;
  uint32_t display_id_ = 0;
  DisplayOptions options_;
  Rect region_;
  Listener listener_;
  std::shared_ptr<FrameSink> sink_;

  std::thread run_thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> finished_{false};
  mutable std::mutex state_mutex_;
  std::condition_variable finished_cv_;
  std::string error_;
  std::optional<Socket> control_;        // lives from handshake to destruction
  std::shared_ptr<SocketGroup> group_;   // tile plane, set once accepted

  DisplayFramebuffer framebuffer_;
  std::mutex fb_mutex_;
  std::atomic<uint32_t> current_frame_{0};
  bool current_complete_ = false;        // guarded by fb_mutex_
  TimestampedMailbox<uint32_t> completions_;

  // Wind-down accounting: after the tile stream closes, workers keep serving
  // queued future-frame tiles until the frame gate provably cannot advance.
  std::mutex advance_mutex_;
  std::condition_variable advance_cv_;
  std::atomic<uint32_t> busy_workers_{0};
  std::atomic<uint32_t> completions_inflight_{0};

  std::atomic<uint64_t> tiles_written_{0};
  std::atomic<uint64_t> late_tiles_{0};
  std::atomic<uint64_t> malformed_tiles_{0};
  std::atomic<uint64_t> frames_completed_{0};
};

/// Dispatcher-mode head node: accepts the client tile group, routes each
/// tile by its uncompressed header, and forwards the still-compressed
/// payload to every display whose region the tile touches.
struct DispatcherOptions {
  std::chrono::milliseconds handshake_timeout = std::chrono::seconds(30);
};

class Dispatcher {
 public:
  /// Binds the client-facing listener (config.dispatcher->port; 0 = ephemeral).
  Dispatcher(const WallConfig& config, DispatcherOptions options = {});
  ~Dispatcher();

  uint16_t port() const;

  /// Display data ports are read from the config captured at construction,
  /// so patch ports before constructing when using ephemeral listeners.
  void start(const Endpoint& coordinator);
  void stop();
  void join();

  bool finished() const { return finished_.load(std::memory_order_acquire); }
  bool wait_finished(std::chrono::milliseconds timeout);
  std::string error() const;

  struct Stats {
    uint64_t tiles_in = 0;
    uint64_t tiles_dropped = 0;      // bezel-only or malformed geometry
    uint64_t forwarded_sends = 0;    // tile sends toward displays (>= tiles_in - dropped)
    uint64_t payload_bytes_in = 0;
    uint64_t payload_bytes_out = 0;  // amplified by multi-display tiles
  };
  Stats stats() const;

 private:
  void run(Endpoint coordinator);
  void control_reader(Socket& control);
  void initiate_stop();

  WallConfig config_;
  DispatcherOptions options_;
  Listener listener_;

  std::thread run_thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> finished_{false};
  mutable std::mutex state_mutex_;
  std::condition_variable finished_cv_;
  std::string error_;
  std::optional<Socket> control_;
  std::shared_ptr<SocketGroup> clients_;
  std::shared_ptr<SocketGroup> displays_;

  std::atomic<uint64_t> tiles_in_{0};
  std::atomic<uint64_t> tiles_dropped_{0};
  std::atomic<uint64_t> forwarded_sends_{0};
};

/// Whole wall in one process: coordinator, every display, and (in dispatcher
/// mode) the dispatcher, wired over loopback. Ephemeral ports in the config
/// are resolved at construction, so config() returns connectable endpoints.
struct LocalWallOptions {
  std::shared_ptr<FrameSink> sink;  // nullptr = NullSink
  unsigned decomp_threads = 0;
  uint64_t session_token = 0;
};

class LocalWall {
 public:
  explicit LocalWall(WallConfig config, LocalWallOptions options = {});
  ~LocalWall();

  const WallConfig& config() const { return config_; }
  Endpoint coordinator_endpoint() const;
  Coordinator& coordinator() { return *coordinator_; }
  size_t display_count() const { return displays_.size(); }
  DisplayProcess& display(size_t i) { return *displays_.at(i); }
  Dispatcher* dispatcher() { return dispatcher_.get(); }

  /// Wait for the natural end of the session: coordinator idle and every
  /// component finished. False on timeout.
  bool wait_session_end(std::chrono::milliseconds timeout);

  /// Force teardown and join everything. Idempotent; the destructor calls it.
  void stop();

 private:
  WallConfig config_;
  std::vector<std::unique_ptr<DisplayProcess>> displays_;
  std::unique_ptr<Dispatcher> dispatcher_;
  std::unique_ptr<Coordinator> coordinator_;
  std::mutex stop_mutex_;
  bool stopped_ = false;
};

}  // namespace dw2
