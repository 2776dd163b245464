// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks for the release criteria. Every criterion
// prints exactly one line,
//
//   PASS criterion N: <what was checked> (<measured detail>)
//   FAIL criterion N: <what was checked> -- <what went wrong>
//
// and the binary exits non-zero if any of them failed. The checks run real
// loopback sessions (coordinator, displays, dispatcher, clients) and compare
// the observable results against independent oracles: per-pixel ownership
// for the router, source-image crops for the displays, absence-of-token
// windows for the completion protocol.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "dw2/bench.hpp"
#include "dw2/client.hpp"
#include "dw2/codec.hpp"
#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/image_io.hpp"
#include "dw2/log.hpp"
#include "dw2/mailbox.hpp"
#include "dw2/protocol.hpp"
#include "dw2/sink.hpp"
#include "dw2/socket.hpp"
#include "dw2/socket_group.hpp"
#include "dw2/wall_config.hpp"

namespace {

using namespace dw2;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = false;
  std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof(buffer), format, args);
  va_end(args);
  return buffer;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Uniform grid on loopback with ephemeral ports everywhere.
WallConfig grid(uint32_t columns, uint32_t rows, uint32_t display_w, uint32_t display_h,
                uint32_t bezel_x, uint32_t bezel_y, Mode mode, uint32_t frames_in_flight) {
  WallConfig cfg;
  cfg.columns = columns;
  cfg.rows = rows;
  cfg.display_width = display_w;
  cfg.display_height = display_h;
  cfg.bezel_x = bezel_x;
  cfg.bezel_y = bezel_y;
  cfg.mode = mode;
  cfg.frames_in_flight = frames_in_flight;
  cfg.coordinator = {"127.0.0.1", 0};
  if (mode == Mode::dispatcher) cfg.dispatcher = Endpoint{"127.0.0.1", 0};
  for (uint32_t row = 0; row < rows; ++row)
    for (uint32_t col = 0; col < columns; ++col)
      cfg.displays.push_back({row * columns + col, row, col, "127.0.0.1", 0});
  return cfg;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* stem) {
    path = std::filesystem::temp_directory_path() /
           (std::string(stem) + "." + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

std::string png_name(const std::filesystem::path& dir, uint32_t frame_id, uint32_t display_id) {
  char name[64];
  std::snprintf(name, sizeof(name), "frame%05u_display%02u.png", frame_id, display_id);
  return (dir / name).string();
}

std::vector<uint8_t> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Split one frame into tile x tile blocks and queue them all.
void stream_frame(ClientSession& session, const PixelBuffer& image, uint32_t frame_id,
                  uint32_t tile) {
  for (uint32_t y = 0; y < image.height; y += tile)
    for (uint32_t x = 0; x < image.width; x += tile) {
      const Rect r{x, y, std::min(tile, image.width - x), std::min(tile, image.height - y)};
      session.send_rgba(frame_id, copy_rect(image, r), r.x, r.y);
    }
}

// Stand up a local wall, stream the images (frame id indexes the vector)
// through one client, and wait for the natural wind-down. Throws on any
// session-level failure so criteria can report it verbatim.
void stream_session(const WallConfig& cfg, const std::vector<PixelBuffer>& images, uint32_t tile,
                    int quality, std::shared_ptr<FrameSink> sink) {
  LocalWallOptions wall_options;
  wall_options.sink = std::move(sink);
  wall_options.decomp_threads = 1;
  LocalWall wall(cfg, wall_options);

  ClientOptions options;
  options.quality = quality;
  auto session = ClientSession::connect(query_info(wall.coordinator_endpoint()), 0, 1, options);
  for (size_t i = 0; i < images.size(); ++i) {
    const uint32_t frame = session->begin_frame();
    stream_frame(*session, images.at(frame), frame, tile);
  }
  session->disconnect();

  if (!wall.wait_session_end(60s)) throw SessionError("wall did not wind down");
  if (!wall.coordinator().error().empty())
    throw SessionError("coordinator error: " + wall.coordinator().error());
  if (wall.coordinator().frames_completed() != images.size())
    throw SessionError(fmt("coordinator completed %u of %zu frames",
                           wall.coordinator().frames_completed(), images.size()));
}

RunRecord replay(const PixelBuffer& image, const WallConfig& cfg, uint32_t tile, int quality,
                 uint32_t peers, uint32_t frames) {
  ReplayOptions options;
  options.tile_size = tile;
  options.quality = quality;
  options.peers = peers;
  options.frames = frames;
  options.decomp_threads = 1;
  return run_replay(image, cfg, options);
}

// Median of three measured runs after one short untimed warm-up.
double median_fps(const PixelBuffer& image, const WallConfig& cfg, uint32_t tile, int quality,
                  uint32_t peers, uint32_t frames) {
  replay(image, cfg, tile, quality, peers, std::max(4u, frames / 4));
  std::array<double, 3> fps{};
  for (double& f : fps) f = replay(image, cfg, tile, quality, peers, frames).fps_mean;
  std::sort(fps.begin(), fps.end());
  return fps[1];
}

// --------------------------------------------------------------------------
// Criterion 1: the router agrees with per-pixel display ownership.
//
// The oracle classifies every pixel of the tile by itself: a pixel belongs
// to a display iff its coordinate modulo the grid pitch falls left/above the
// bezel strip, and the owning display is read off the pixel's grid cell.
// route_rect instead intersects candidate cell regions, so the two only
// agree when both are right.

Outcome criterion_routing() {
  const auto start = Clock::now();
  std::mt19937_64 rng(0x5eed0001);
  uint64_t tiles_checked = 0;

  struct Box {
    uint32_t min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    uint64_t pixels = 0;
  };

  for (int wall = 0; wall < 1000; ++wall) {
    const uint32_t columns = 1 + uint32_t(rng() % 6);
    const uint32_t rows = 1 + uint32_t(rng() % 6);
    const uint32_t dw = 16 + uint32_t(rng() % 120);
    const uint32_t dh = 16 + uint32_t(rng() % 120);
    const uint32_t bx = uint32_t(rng() % 40);
    const uint32_t by = uint32_t(rng() % 40);
    const WallConfig cfg = grid(columns, rows, dw, dh, bx, by, Mode::direct, 1);
    const auto [vw, vh] = virtual_size(cfg);
    const uint32_t pitch_x = dw + bx;
    const uint32_t pitch_y = dh + by;

    std::vector<Box> boxes(size_t(columns) * rows);
    for (int t = 0; t < 10; ++t) {
      const uint32_t w = std::min(1 + uint32_t(rng() % 64), vw);
      const uint32_t h = std::min(1 + uint32_t(rng() % 64), vh);
      const uint32_t x = uint32_t(rng() % (vw - w + 1));
      const uint32_t y = uint32_t(rng() % (vh - h + 1));

      for (auto& box : boxes) box.pixels = 0;
      size_t owners = 0;
      for (uint32_t py = y; py < y + h; ++py)
        for (uint32_t px = x; px < x + w; ++px) {
          if (px % pitch_x >= dw || py % pitch_y >= dh) continue;  // bezel pixel
          Box& box = boxes[size_t(py / pitch_y) * columns + px / pitch_x];
          if (box.pixels == 0) {
            box.min_x = box.max_x = px;
            box.min_y = box.max_y = py;
            ++owners;
          } else {
            box.min_x = std::min(box.min_x, px);
            box.min_y = std::min(box.min_y, py);
            box.max_x = std::max(box.max_x, px);
            box.max_y = std::max(box.max_y, py);
          }
          ++box.pixels;
        }

      const auto routed = route_rect(cfg, Rect{x, y, w, h});
      if (routed.size() != owners)
        return fail(fmt("wall %d tile %ux%u+%u+%u: %zu routed displays, %zu own pixels", wall, w,
                        h, x, y, routed.size(), owners));
      uint32_t previous = 0;
      bool first = true;
      for (const auto& [id, piece] : routed) {
        if (!first && id <= previous)
          return fail(fmt("wall %d: display ids not ascending (%u after %u)", wall, id, previous));
        first = false;
        previous = id;
        if (id >= boxes.size() || boxes[id].pixels == 0)
          return fail(fmt("wall %d: routed to display %u which owns no tile pixel", wall, id));
        const Box& box = boxes[id];
        const Rect want{box.min_x, box.min_y, box.max_x - box.min_x + 1,
                        box.max_y - box.min_y + 1};
        if (!(piece == want))
          return fail(fmt("wall %d display %u: piece %ux%u+%u+%u, oracle %ux%u+%u+%u", wall, id,
                          piece.width, piece.height, piece.x, piece.y, want.width, want.height,
                          want.x, want.y));
        if (uint64_t(piece.width) * piece.height != box.pixels)
          return fail(fmt("wall %d display %u: piece covers %llu pixels, owns %llu", wall, id,
                          (unsigned long long)(uint64_t(piece.width) * piece.height),
                          (unsigned long long)box.pixels));
      }
      ++tiles_checked;
    }
  }

  const double elapsed = seconds_since(start);
  if (elapsed >= 10.0) return fail(fmt("matched but took %.1fs, budget 10s", elapsed));
  return pass(fmt("%llu tiles over 1000 random walls matched in %.2fs",
                  (unsigned long long)tiles_checked, elapsed));
}

// --------------------------------------------------------------------------
// Criterion 2: the shipped example walls have the documented virtual extents.

Outcome criterion_wall_sizes(const std::string& configs_dir) {
  const auto power = virtual_size(load_config(configs_dir + "/powerwall.json"));
  if (power != std::pair{23040u, 5760u})
    return fail(fmt("powerwall.json spans %ux%u, expected 23040x5760", power.first, power.second));
  const auto rattler = virtual_size(load_config(configs_dir + "/rattler.json"));
  if (rattler != std::pair{11520u, 6480u})
    return fail(
        fmt("rattler.json spans %ux%u, expected 11520x6480", rattler.first, rattler.second));
  return pass("powerwall 23040x5760, rattler 11520x6480");
}

// --------------------------------------------------------------------------
// Criterion 3: raw direct streaming is lossless end to end on a 2x2 wall of
// 320x240 panels. Every panel PNG must equal the crop of the source frame
// at that display's region, bit for bit, for 10 consecutive frames.

std::vector<PixelBuffer> test_card_frames(uint32_t width, uint32_t height, uint32_t count) {
  std::vector<PixelBuffer> frames;
  for (uint32_t f = 0; f < count; ++f)
    frames.push_back(generate_synthetic(width, height, 32, 0xca5d + f));
  return frames;
}

Outcome criterion_raw_lossless() {
  const auto start = Clock::now();
  const WallConfig cfg = grid(2, 2, 320, 240, 0, 0, Mode::direct, 2);
  const auto [vw, vh] = virtual_size(cfg);
  const auto frames = test_card_frames(vw, vh, 10);

  TempDir dir("dw2-accept-raw");
  stream_session(cfg, frames, 64, kRawQuality,
                 std::make_shared<PngDirectorySink>(dir.path.string()));

  for (uint32_t f = 0; f < frames.size(); ++f)
    for (uint32_t d = 0; d < cfg.display_count(); ++d) {
      const PixelBuffer got = read_png(png_name(dir.path, f, d));
      if (!(got == copy_rect(frames[f], display_region(cfg, d))))
        return fail(fmt("frame %u display %u differs from the source crop", f, d));
    }

  const double elapsed = seconds_since(start);
  if (elapsed >= 30.0) return fail(fmt("lossless but took %.1fs, budget 30s", elapsed));
  return pass(fmt("40 panels bit-identical to the source crops in %.1fs", elapsed));
}

// --------------------------------------------------------------------------
// Criterion 4: for the same raw stream, dispatcher mode produces the same
// panel files as direct mode, byte for byte.

Outcome criterion_mode_parity() {
  const WallConfig direct_cfg = grid(2, 2, 320, 240, 0, 0, Mode::direct, 2);
  const WallConfig dispatcher_cfg = grid(2, 2, 320, 240, 0, 0, Mode::dispatcher, 2);
  const auto [vw, vh] = virtual_size(direct_cfg);
  const auto frames = test_card_frames(vw, vh, 10);

  TempDir direct_dir("dw2-accept-direct");
  TempDir dispatcher_dir("dw2-accept-dispatcher");
  stream_session(direct_cfg, frames, 64, kRawQuality,
                 std::make_shared<PngDirectorySink>(direct_dir.path.string()));
  stream_session(dispatcher_cfg, frames, 64, kRawQuality,
                 std::make_shared<PngDirectorySink>(dispatcher_dir.path.string()));

  uint32_t compared = 0;
  for (uint32_t f = 0; f < frames.size(); ++f)
    for (uint32_t d = 0; d < direct_cfg.display_count(); ++d) {
      if (file_bytes(png_name(direct_dir.path, f, d)) !=
          file_bytes(png_name(dispatcher_dir.path, f, d)))
        return fail(fmt("frame %u display %u differs between modes", f, d));
      ++compared;
    }
  return pass(fmt("%u panel files byte-identical between modes", compared));
}

// --------------------------------------------------------------------------
// Criterion 5: the same pipeline at jpeg quality 90 keeps every assembled
// panel above 35 dB PSNR against the pristine crop of a photographic image.

Outcome criterion_jpeg_fidelity() {
  const WallConfig cfg = grid(2, 2, 320, 240, 0, 0, Mode::direct, 2);
  const auto [vw, vh] = virtual_size(cfg);
  std::vector<PixelBuffer> frames;
  for (uint32_t f = 0; f < 5; ++f) frames.push_back(generate_photographic(vw, vh, 0xf07 + f));

  struct Capture {
    std::mutex mutex;
    std::vector<std::pair<std::pair<uint32_t, uint32_t>, PixelBuffer>> panels;
  };
  auto capture = std::make_shared<Capture>();
  auto sink = std::make_shared<CallbackSink>(
      [capture](uint32_t display_id, uint32_t frame_id, const PixelBuffer& pixels) {
        std::lock_guard lock(capture->mutex);
        capture->panels.emplace_back(std::pair{frame_id, display_id}, pixels);
      });

  stream_session(cfg, frames, 64, 90, sink);

  std::lock_guard lock(capture->mutex);
  if (capture->panels.size() != frames.size() * cfg.display_count())
    return fail(fmt("captured %zu panels, expected %zu", capture->panels.size(),
                    frames.size() * cfg.display_count()));
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [key, pixels] : capture->panels) {
    const double db =
        psnr(pixels, copy_rect(frames.at(key.first), display_region(cfg, key.second)));
    if (db < worst) worst = db;
    if (db < 35.0)
      return fail(fmt("frame %u display %u reached only %.1f dB", key.first, key.second, db));
  }
  return pass(fmt("worst of 20 panels %.1f dB, floor 35", worst));
}

// --------------------------------------------------------------------------
// Criterion 6: a frame completes exactly once, and only once every pixel
// arrived. One display, nine tiles per frame: each frame sends the tiles in
// a fresh order with one duplicated mid-frame and one withheld. While the
// tile is withheld the next admission token must not appear; sending it
// must complete the frame exactly once; a stale duplicate after completion
// must change nothing. Twenty distinct orders.

Outcome criterion_completion_exactly_once() {
  const uint32_t kFrames = 20;
  const uint32_t kTile = 64;
  const WallConfig cfg = grid(1, 1, 192, 192, 0, 0, Mode::direct, 1);

  struct Capture {
    std::mutex mutex;
    std::map<uint32_t, uint32_t> completions;  // frame -> sink callbacks
  };
  auto capture = std::make_shared<Capture>();
  LocalWallOptions wall_options;
  wall_options.decomp_threads = 1;
  wall_options.sink = std::make_shared<CallbackSink>(
      [capture](uint32_t, uint32_t frame_id, const PixelBuffer&) {
        std::lock_guard lock(capture->mutex);
        ++capture->completions[frame_id];
      });
  LocalWall wall(cfg, wall_options);

  ClientOptions options;
  options.quality = kRawQuality;
  options.compress_threads = 1;  // keep the wire order equal to the send order
  auto session = ClientSession::connect(query_info(wall.coordinator_endpoint()), 0, 1, options);

  std::vector<Rect> cells;
  for (uint32_t y = 0; y < 192; y += kTile)
    for (uint32_t x = 0; x < 192; x += kTile) cells.push_back(Rect{x, y, kTile, kTile});

  std::mt19937_64 rng(0x0bde);
  std::set<std::array<uint32_t, 9>> used_orders;
  uint64_t tiles_sent = 0;

  auto admitted = session->try_begin_frame(5s);
  if (!admitted || *admitted != 0) return fail("frame 0 was not admitted");

  for (uint32_t f = 0; f < kFrames; ++f) {
    if (*admitted != f) return fail(fmt("expected admission of frame %u, got %u", f, *admitted));
    const PixelBuffer image = generate_synthetic(192, 192, kTile, 0x60d + f);

    std::array<uint32_t, 9> order{0, 1, 2, 3, 4, 5, 6, 7, 8};
    do {
      std::shuffle(order.begin(), order.end(), rng);
    } while (!used_orders.insert(order).second);

    auto send_cell = [&](uint32_t index) {
      const Rect& cell = cells[index];
      session->send_rgba(f, copy_rect(image, cell), cell.x, cell.y);
      ++tiles_sent;
    };

    // All but the last of the order, plus one duplicate mid-frame.
    for (int i = 0; i < 8; ++i) send_cell(order[i]);
    send_cell(order[0]);

    // The withheld tile keeps the frame open: no token may arrive. Three of
    // the frames get the full two-second stare-down, the rest a short one.
    if (session->try_begin_frame(f % 7 == 0 ? 2000ms : 60ms))
      return fail(fmt("frame %u: admission advanced while tile %u was withheld", f, order[8]));
    {
      std::lock_guard lock(capture->mutex);
      if (capture->completions.count(f))
        return fail(fmt("frame %u: sink fired while tile %u was withheld", f, order[8]));
    }

    send_cell(order[8]);
    admitted = session->try_begin_frame(5s);
    if (!admitted || *admitted != f + 1)
      return fail(fmt("frame %u: completion did not admit frame %u", f, f + 1));

    // Stale duplicate for the finished frame: late, never a second completion.
    send_cell(order[1]);
  }

  session->disconnect();
  if (!wall.wait_session_end(30s)) return fail("wall did not wind down");
  if (!wall.coordinator().error().empty())
    return fail("coordinator error: " + wall.coordinator().error());
  if (wall.coordinator().frames_completed() != kFrames)
    return fail(fmt("coordinator recorded %u frames, expected %u",
                    wall.coordinator().frames_completed(), kFrames));

  const auto stats = wall.display(0).stats();
  if (stats.frames_completed != kFrames)
    return fail(fmt("display completed %llu frames, expected %u",
                    (unsigned long long)stats.frames_completed, kFrames));
  if (stats.malformed_tiles != 0)
    return fail(fmt("%llu malformed tiles", (unsigned long long)stats.malformed_tiles));
  if (stats.tiles_written + stats.late_tiles != tiles_sent)
    return fail(fmt("tiles written %llu + late %llu != sent %llu",
                    (unsigned long long)stats.tiles_written, (unsigned long long)stats.late_tiles,
                    (unsigned long long)tiles_sent));

  std::lock_guard lock(capture->mutex);
  if (capture->completions.size() != kFrames)
    return fail(fmt("sink saw %zu distinct frames, expected %u", capture->completions.size(),
                    kFrames));
  for (const auto& [frame, count] : capture->completions)
    if (count != 1) return fail(fmt("frame %u completed %u times", frame, count));
  return pass(fmt("%u frames, %u tile orders, duplicates and stale tiles never re-completed",
                  kFrames, kFrames));
}

// --------------------------------------------------------------------------
// Criterion 7: the frames-in-flight window admits exactly that many frames
// while the display is stalled (no tiles, so it can never complete), and
// exactly one more per completed frame.

Outcome criterion_backpressure() {
  for (uint32_t window : {1u, 2u, 3u}) {
    const WallConfig cfg = grid(1, 1, 160, 120, 0, 0, Mode::direct, window);
    LocalWallOptions options;
    options.decomp_threads = 1;
    LocalWall wall(cfg, options);

    ClientOptions client_options;
    client_options.quality = kRawQuality;
    auto session =
        ClientSession::connect(query_info(wall.coordinator_endpoint()), 0, 1, client_options);

    uint32_t admitted = 0;
    while (admitted < window + 2) {
      const auto frame = session->try_begin_frame(250ms);
      if (!frame) break;
      if (*frame != admitted)
        return fail(fmt("window %u: admitted frame %u, expected %u", window, *frame, admitted));
      ++admitted;
    }
    if (admitted != window)
      return fail(fmt("window %u admitted %u frames before any completion", window, admitted));

    // Covering frame 0 completes it on the lone display and must unlock
    // exactly one more token.
    session->send_rgba(0, generate_synthetic(160, 120, 32, 7), 0, 0);
    const auto unlocked = session->try_begin_frame(5s);
    if (!unlocked || *unlocked != window)
      return fail(fmt("window %u: completing frame 0 did not admit frame %u", window, window));
    if (session->try_begin_frame(250ms))
      return fail(fmt("window %u admitted a frame beyond the window", window));

    session->disconnect();
    if (!wall.wait_session_end(30s)) return fail(fmt("window %u: wall did not wind down", window));
  }
  return pass("windows 1/2/3 admitted exactly 1/2/3 frames, +1 after the first completion");
}

// --------------------------------------------------------------------------
// Criterion 8: direct mode keeps bulk pixel data off the head node. The
// coordinator sees control traffic only (well under 1 KiB per frame), while
// the dispatcher-mode head node ingests at least the full payload.

Outcome criterion_head_node_relief() {
  const PixelBuffer image = generate_synthetic(320, 240, 64, 0x8ead);
  const auto direct =
      replay(image, grid(2, 2, 160, 120, 0, 0, Mode::direct, 2), 64, kRawQuality, 1, 10);
  const auto dispatched =
      replay(image, grid(2, 2, 160, 120, 0, 0, Mode::dispatcher, 2), 64, kRawQuality, 1, 10);

  if (direct.head_node_bytes_per_frame >= 1024.0)
    return fail(fmt("direct head node saw %.0f bytes/frame, expected under 1024",
                    direct.head_node_bytes_per_frame));
  if (dispatched.head_node_bytes_per_frame < dispatched.payload_bytes_per_frame)
    return fail(fmt("dispatcher head node saw %.0f bytes/frame, less than the %.0f byte payload",
                    dispatched.head_node_bytes_per_frame, dispatched.payload_bytes_per_frame));
  return pass(fmt("direct %.0f B/frame vs dispatcher %.0f B/frame (payload %.0f)",
                  direct.head_node_bytes_per_frame, dispatched.head_node_bytes_per_frame,
                  dispatched.payload_bytes_per_frame));
}

// --------------------------------------------------------------------------
// Criterion 9: on the hard-to-compress test card, larger tiles raise the
// frame rate in both modes, and the dispatcher pays a steeper per-tile
// price (every tile crosses one extra hop). The wall is big enough that the
// runs are compute-bound, so the per-tile overhead shows up in the rate
// instead of hiding in scheduler latency. Medians of three runs.

Outcome criterion_tile_size_scaling() {
  const PixelBuffer image = generate_synthetic(1024, 512, 32, 0x71e5);
  const WallConfig direct_cfg = grid(2, 1, 512, 512, 0, 0, Mode::direct, 2);
  const WallConfig dispatcher_cfg = grid(2, 1, 512, 512, 0, 0, Mode::dispatcher, 2);

  // The four configurations are measured interleaved so that slow drift in
  // the host (caches, frequency, background load) lands on all of them
  // alike instead of biasing whichever ran last.
  struct Setup {
    const WallConfig* cfg;
    uint32_t tile;
  };
  const std::array<Setup, 4> setups = {{{&direct_cfg, 32},
                                        {&direct_cfg, 256},
                                        {&dispatcher_cfg, 32},
                                        {&dispatcher_cfg, 256}}};
  std::array<std::array<double, 3>, 4> samples{};
  for (const auto& setup : setups) replay(image, *setup.cfg, setup.tile, 75, 1, 8);  // warm-up
  for (int rep = 0; rep < 3; ++rep)
    for (size_t s = 0; s < setups.size(); ++s)
      samples[s][rep] = replay(image, *setups[s].cfg, setups[s].tile, 75, 1, 40).fps_mean;
  for (auto& runs : samples) std::sort(runs.begin(), runs.end());

  const double direct_small = samples[0][1];
  const double direct_large = samples[1][1];
  const double dispatcher_small = samples[2][1];
  const double dispatcher_large = samples[3][1];

  if (direct_large <= direct_small)
    return fail(fmt("direct: 256px tiles ran at %.1f fps, not above %.1f fps with 32px tiles",
                    direct_large, direct_small));
  if (dispatcher_large <= dispatcher_small)
    return fail(fmt("dispatcher: 256px tiles ran at %.1f fps, not above %.1f fps with 32px tiles",
                    dispatcher_large, dispatcher_small));
  const double direct_gain = direct_large / direct_small;
  const double dispatcher_gain = dispatcher_large / dispatcher_small;
  if (dispatcher_gain <= direct_gain)
    return fail(fmt("small tiles cost the dispatcher x%.2f but direct x%.2f; expected the "
                    "dispatcher to pay more",
                    dispatcher_gain, direct_gain));
  return pass(fmt("direct %.1f->%.1f fps (x%.2f), dispatcher %.1f->%.1f fps (x%.2f)",
                  direct_small, direct_large, direct_gain, dispatcher_small, dispatcher_large,
                  dispatcher_gain));
}

// --------------------------------------------------------------------------
// Criterion 10: payload per frame falls strictly as jpeg quality drops on
// the photographic image.

Outcome criterion_quality_ladder() {
  const PixelBuffer image = generate_photographic(320, 120, 0xfade);
  const WallConfig cfg = grid(2, 1, 160, 120, 0, 0, Mode::direct, 2);

  std::string detail = "payload B/frame";
  double previous = std::numeric_limits<double>::infinity();
  for (const int quality : {100, 75, 50, 25}) {
    const auto record = replay(image, cfg, 64, quality, 1, 4);
    if (record.payload_bytes_per_frame >= previous)
      return fail(fmt("quality %d produced %.0f bytes/frame, not below %.0f", quality,
                      record.payload_bytes_per_frame, previous));
    previous = record.payload_bytes_per_frame;
    detail += fmt(" %d:%.0f", quality, record.payload_bytes_per_frame);
  }
  return pass(detail);
}

// --------------------------------------------------------------------------
// Criterion 11: four displays, one to four senders. Direct mode must
// sustain at least the dispatcher's frame rate at four senders. Raw
// payloads make the frame heavy enough (1 MiB) that the dispatcher's
// store-and-forward hop costs real time. Medians of three runs.

Outcome criterion_multi_sender() {
  const PixelBuffer image = generate_synthetic(512, 512, 64, 0xc11e);
  const WallConfig direct_cfg = grid(2, 2, 256, 256, 0, 0, Mode::direct, 2);
  const WallConfig dispatcher_cfg = grid(2, 2, 256, 256, 0, 0, Mode::dispatcher, 2);

  const double direct_one = median_fps(image, direct_cfg, 64, kRawQuality, 1, 20);
  const double direct_four = median_fps(image, direct_cfg, 64, kRawQuality, 4, 20);
  const double dispatcher_one = median_fps(image, dispatcher_cfg, 64, kRawQuality, 1, 20);
  const double dispatcher_four = median_fps(image, dispatcher_cfg, 64, kRawQuality, 4, 20);

  if (direct_four < dispatcher_four)
    return fail(fmt("at 4 senders direct ran at %.1f fps, below the dispatcher's %.1f fps",
                    direct_four, dispatcher_four));
  return pass(fmt("1->4 senders: direct %.1f->%.1f fps, dispatcher %.1f->%.1f fps", direct_one,
                  direct_four, dispatcher_one, dispatcher_four));
}

// --------------------------------------------------------------------------
// Criterion 12: the mailbox and the socket group survive randomized
// multi-threaded stress without losing, duplicating, reordering (within a
// frame), or misfiltering anything, and tear down cleanly.

Outcome stress_mailbox() {
  constexpr int kProducers = 5;
  constexpr int kConsumers = 5;
  constexpr uint32_t kPerProducer = 3000;
  constexpr uint32_t kFrameIds = 12;

  TimestampedMailbox<uint64_t> box;
  std::vector<std::vector<uint64_t>> posted(kProducers);
  std::vector<std::vector<std::pair<uint32_t, uint64_t>>> consumed(kConsumers);
  std::atomic<uint32_t> filter_mismatches{0};
  std::atomic<uint64_t> filtered_pops{0};

  {
    std::vector<std::thread> producers;
    for (int p = 0; p < kProducers; ++p)
      producers.emplace_back([&, p] {
        std::mt19937_64 rng(0x900d + p);
        posted[p].reserve(kPerProducer);
        for (uint32_t seq = 0; seq < kPerProducer; ++seq) {
          const uint32_t frame = uint32_t(rng() % kFrameIds);
          const uint64_t value = (uint64_t(p) << 48) | (uint64_t(frame) << 32) | seq;
          posted[p].push_back(value);
          box.post(frame, value);
        }
      });

    std::vector<std::thread> consumers;
    for (int c = 0; c < kConsumers; ++c)
      consumers.emplace_back([&, c] {
        std::mt19937_64 rng(0xfeed + c);
        for (;;) {
          std::optional<TimestampedMailbox<uint64_t>::Entry> entry;
          const int op = int(rng() % 3);
          if (op == 0) {
            entry = box.pop_any_for(100ms);
          } else {
            const uint32_t pick = uint32_t(rng() % kFrameIds);
            entry = op == 1 ? box.pop_matching_for(
                                  [pick](uint32_t fid) { return fid == pick; }, 20ms)
                            : box.pop_matching_for(
                                  [pick](uint32_t fid) { return fid <= pick; }, 20ms);
            if (entry) {
              filtered_pops.fetch_add(1, std::memory_order_relaxed);
              const bool matches = op == 1 ? entry->first == pick : entry->first <= pick;
              if (!matches) filter_mismatches.fetch_add(1, std::memory_order_relaxed);
            }
          }
          if (entry) {
            consumed[c].emplace_back(entry->first, entry->second);
          } else if (box.closed()) {
            while (auto rest = box.pop_any()) consumed[c].emplace_back(rest->first, rest->second);
            return;
          }
        }
      });

    for (auto& t : producers) t.join();
    box.close();
    for (auto& t : consumers) t.join();
  }

  if (filter_mismatches.load() != 0)
    return fail(fmt("%u filtered pops returned non-matching frames", filter_mismatches.load()));

  std::vector<uint64_t> all_posted;
  for (const auto& p : posted) all_posted.insert(all_posted.end(), p.begin(), p.end());
  std::vector<uint64_t> all_consumed;
  for (int c = 0; c < kConsumers; ++c) {
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> last_seq;  // (producer, frame)
    for (const auto& [frame, value] : consumed[c]) {
      const uint32_t producer = uint32_t(value >> 48);
      const uint32_t encoded_frame = uint32_t(value >> 32) & 0xffffu;
      const uint32_t seq = uint32_t(value);
      if (encoded_frame != frame)
        return fail(fmt("item of producer %u delivered under frame %u, posted under %u", producer,
                        frame, encoded_frame));
      const auto [it, fresh] = last_seq.try_emplace({producer, frame}, seq);
      if (!fresh) {
        if (seq <= it->second)
          return fail(fmt("producer %u frame %u items reordered (%u after %u)", producer, frame,
                          seq, it->second));
        it->second = seq;
      }
      all_consumed.push_back(value);
    }
  }
  std::sort(all_posted.begin(), all_posted.end());
  std::sort(all_consumed.begin(), all_consumed.end());
  if (all_posted != all_consumed)
    return fail(fmt("posted %zu items, consumed %zu (lost or duplicated)", all_posted.size(),
                    all_consumed.size()));
  return pass(fmt("%zu items, %llu filtered pops", all_posted.size(),
                  (unsigned long long)filtered_pops.load()));
}

Outcome stress_socket_group() {
  constexpr uint32_t kPeers = 4;
  constexpr uint64_t kToken = 0x57e550f7;
  constexpr uint32_t kHubSendsPerThread = 2500;   // x2 threads
  constexpr uint32_t kSpokeSends = 1500;          // x4 spokes
  constexpr uint32_t kFrameIds = 6;

  const auto put_u32 = [](std::vector<uint8_t>& bytes, size_t at, uint32_t v) {
    bytes[at + 0] = uint8_t(v);
    bytes[at + 1] = uint8_t(v >> 8);
    bytes[at + 2] = uint8_t(v >> 16);
    bytes[at + 3] = uint8_t(v >> 24);
  };
  const auto get_u32 = [](const std::vector<uint8_t>& bytes, size_t at) {
    return uint32_t(bytes[at]) | uint32_t(bytes[at + 1]) << 8 | uint32_t(bytes[at + 2]) << 16 |
           uint32_t(bytes[at + 3]) << 24;
  };
  // A 4x1 raw strip whose payload carries (tag, seq, frame echo).
  const auto strip = [&](uint32_t frame, uint32_t tag, uint32_t seq) {
    Tile tile;
    tile.header.frame_id = frame;
    tile.header.width = 4;
    tile.header.height = 1;
    tile.header.codec = Codec::raw_rgba8;
    tile.payload.assign(16, 0);
    put_u32(tile.payload, 0, tag);
    put_u32(tile.payload, 4, seq);
    put_u32(tile.payload, 8, frame);
    tile.header.payload_len = uint32_t(tile.payload.size());
    return tile;
  };
  // tag | frame | seq packed for multiset comparison.
  const auto pack = [](uint32_t tag, uint32_t frame, uint32_t seq) {
    return (uint64_t(tag) << 40) | (uint64_t(frame) << 32) | seq;
  };

  Listener listener(0);
  auto accepting = std::async(std::launch::async,
                              [&] { return SocketGroup::accept_group(listener, kToken, kPeers); });
  std::array<std::unique_ptr<SocketGroup>, kPeers> spokes;
  {
    std::vector<std::thread> connecting;
    for (uint32_t r = 0; r < kPeers; ++r)
      connecting.emplace_back([&, r] {
        spokes[r] = SocketGroup::connect_group({{"127.0.0.1", listener.port()}}, kToken, r,
                                               kPeers);
      });
    for (auto& t : connecting) t.join();
  }
  auto hub = accepting.get();

  // What each side sent, keyed for the receiver that should see it.
  std::array<std::array<std::vector<uint64_t>, kPeers>, 2> hub_sent;  // [thread][member]
  std::array<std::vector<uint64_t>, kPeers> spoke_sent;
  // What each receiver saw: one collector per receiving thread.
  std::array<std::vector<std::pair<size_t, uint64_t>>, 2> hub_got;  // (member, packed)
  std::atomic<uint32_t> wrong_key{0};

  // Pop loop shared by all receivers: mixed any/filtered pops, drain on close.
  const auto drain = [&wrong_key](SocketGroup& group, uint64_t rng_seed,
                                  std::vector<std::pair<size_t, uint64_t>>& out,
                                  const std::function<uint64_t(const Tile&)>& repack) {
    std::mt19937_64 rng(rng_seed);
    auto take = [&](std::optional<std::pair<uint32_t, ReceivedMessage>> entry) {
      if (!entry) return false;
      if (const auto* tile = std::get_if<Tile>(&entry->second.msg)) {
        if (entry->first != tile->header.frame_id)
          wrong_key.fetch_add(1, std::memory_order_relaxed);
        out.emplace_back(entry->second.member, repack(*tile));
      }
      return true;
    };
    for (;;) {
      const bool filtered = rng() % 3 == 0;
      bool got;
      if (filtered) {
        const uint32_t pick = 1 + uint32_t(rng() % kFrameIds);
        got = take(group.incoming().pop_matching_for(
            [pick](uint32_t fid) { return fid == pick; }, 20ms));
      } else {
        got = take(group.incoming().pop_any_for(100ms));
      }
      if (!got && group.incoming().closed()) {
        while (take(group.incoming().pop_any())) {
        }
        return;
      }
    }
  };
  const auto repack = [&](const Tile& tile) {
    return pack(get_u32(tile.payload, 0), get_u32(tile.payload, 8), get_u32(tile.payload, 4));
  };

  std::vector<std::thread> threads;
  for (uint32_t t = 0; t < 2; ++t)
    threads.emplace_back([&, t] {  // hub senders
      std::mt19937_64 rng(0xab5e + t);
      const uint32_t tag = 100 + t;
      for (uint32_t seq = 0; seq < kHubSendsPerThread; ++seq) {
        const uint32_t member = uint32_t(rng() % kPeers);
        const uint32_t frame = 1 + uint32_t(rng() % kFrameIds);
        hub_sent[t][member].push_back(pack(tag, frame, seq));
        hub->send_to(member, strip(frame, tag, seq));
      }
    });
  for (uint32_t t = 0; t < 2; ++t)
    threads.emplace_back([&, t] { drain(*hub, 0xd0ab + t, hub_got[t], repack); });
  for (uint32_t r = 0; r < kPeers; ++r)
    threads.emplace_back([&, r] {  // spoke senders
      std::mt19937_64 rng(0x5b0 + r);
      for (uint32_t seq = 0; seq < kSpokeSends; ++seq) {
        const uint32_t frame = 1 + uint32_t(rng() % kFrameIds);
        spoke_sent[r].push_back(pack(r, frame, seq));
        spokes[r]->send_to(0, strip(frame, r, seq));
      }
    });
  std::array<std::vector<std::pair<size_t, uint64_t>>, kPeers> spoke_got_pairs;
  for (uint32_t r = 0; r < kPeers; ++r)
    threads.emplace_back([&, r] { drain(*spokes[r], 0xd05b + r, spoke_got_pairs[r], repack); });

  // Senders finish first; concurrent closes release each side's drain wait.
  threads[0].join();
  threads[1].join();
  for (uint32_t r = 0; r < kPeers; ++r) threads[4 + r].join();
  std::vector<std::future<void>> closings;
  closings.push_back(std::async(std::launch::async, [&] { hub->close(); }));
  for (auto& spoke : spokes)
    closings.push_back(std::async(std::launch::async, [&spoke] { spoke->close(); }));
  for (auto& c : closings) c.get();
  threads[2].join();
  threads[3].join();
  for (uint32_t r = 0; r < kPeers; ++r) threads[8 + r].join();

  if (wrong_key.load() != 0)
    return fail(fmt("%u tiles arrived under the wrong mailbox frame id", wrong_key.load()));

  // Exactly-once, both directions, with per-sender order within a frame.
  std::array<std::map<std::pair<uint32_t, uint32_t>, uint32_t>, 2> hub_last;
  std::vector<uint64_t> hub_all;
  for (uint32_t t = 0; t < 2; ++t)
    for (const auto& [member, packed] : hub_got[t]) {
      const uint32_t tag = uint32_t(packed >> 40);
      const uint32_t frame = uint32_t(packed >> 32) & 0xffu;
      const uint32_t seq = uint32_t(packed);
      if (tag != member)
        return fail(fmt("hub saw a tile of spoke %u on member %zu", tag, member));
      const auto [it, fresh] = hub_last[t].try_emplace({tag, frame}, seq);
      if (!fresh) {
        if (seq <= it->second)
          return fail(fmt("spoke %u frame %u tiles reordered at the hub", tag, frame));
        it->second = seq;
      }
      hub_all.push_back(packed);
    }
  std::vector<uint64_t> spoke_all_sent;
  for (const auto& s : spoke_sent)
    spoke_all_sent.insert(spoke_all_sent.end(), s.begin(), s.end());
  std::sort(hub_all.begin(), hub_all.end());
  std::sort(spoke_all_sent.begin(), spoke_all_sent.end());
  if (hub_all != spoke_all_sent)
    return fail(fmt("hub received %zu tiles, spokes sent %zu (lost or duplicated)",
                    hub_all.size(), spoke_all_sent.size()));

  size_t spoke_tiles = 0;
  for (uint32_t r = 0; r < kPeers; ++r) {
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> last;  // (tag, frame)
    std::vector<uint64_t> got;
    for (const auto& [member, packed] : spoke_got_pairs[r]) {
      if (member != 0) return fail(fmt("spoke %u saw member %zu", r, member));
      const uint32_t tag = uint32_t(packed >> 40);
      const uint32_t frame = uint32_t(packed >> 32) & 0xffu;
      const uint32_t seq = uint32_t(packed);
      const auto [it, fresh] = last.try_emplace({tag, frame}, seq);
      if (!fresh) {
        if (seq <= it->second)
          return fail(fmt("hub tiles for spoke %u frame %u reordered", r, frame));
        it->second = seq;
      }
      got.push_back(packed);
    }
    std::vector<uint64_t> want;
    for (uint32_t t = 0; t < 2; ++t)
      want.insert(want.end(), hub_sent[t][r].begin(), hub_sent[t][r].end());
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    if (got != want)
      return fail(fmt("spoke %u received %zu tiles, hub sent it %zu (lost or duplicated)", r,
                      got.size(), want.size()));
    spoke_tiles += got.size();
  }

  // Byte conservation across the whole exchange, handshakes included.
  uint64_t spokes_sent_bytes = 0, spokes_received_bytes = 0;
  for (const auto& spoke : spokes) {
    spokes_sent_bytes += spoke->bytes_sent();
    spokes_received_bytes += spoke->bytes_received();
  }
  if (hub->bytes_received() != spokes_sent_bytes)
    return fail(fmt("hub received %llu bytes, spokes sent %llu",
                    (unsigned long long)hub->bytes_received(),
                    (unsigned long long)spokes_sent_bytes));
  if (hub->bytes_sent() != spokes_received_bytes)
    return fail(fmt("hub sent %llu bytes, spokes received %llu",
                    (unsigned long long)hub->bytes_sent(),
                    (unsigned long long)spokes_received_bytes));

  return pass(fmt("%zu tiles conserved over 12 threads", hub_all.size() + spoke_tiles));
}

Outcome criterion_stress_suites() {
  const auto start = Clock::now();
  Outcome mailbox = stress_mailbox();
  if (!mailbox.ok) return fail("mailbox: " + mailbox.detail);
  Outcome group = stress_socket_group();
  if (!group.ok) return fail("socket group: " + group.detail);
  const double elapsed = seconds_since(start);
  if (elapsed >= 60.0) return fail(fmt("passed but took %.1fs, budget 60s", elapsed));
  return pass(fmt("mailbox %s; group %s; %.1fs", mailbox.detail.c_str(), group.detail.c_str(),
                  elapsed));
}

}  // namespace

int main(int argc, char** argv) {
  // The duplicate/stale tiles of criterion 6 are answered with warnings by
  // design; keep the output to the one line per criterion.
  log::set_level(log::Level::error);

  std::string configs_dir = "configs";
  int only = 0;  // 0 = run everything
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--configs" && i + 1 < argc) {
      configs_dir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--configs <dir>] [--only <criterion>]\n");
      return 2;
    }
  }

  struct Criterion {
    int number;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "tile routing matches per-pixel display ownership", criterion_routing},
      {2, "example walls span the documented virtual extents",
       [&] { return criterion_wall_sizes(configs_dir); }},
      {3, "raw direct streaming is lossless", criterion_raw_lossless},
      {4, "dispatcher output is bit-identical to direct", criterion_mode_parity},
      {5, "jpeg quality 90 keeps panels above 35 dB", criterion_jpeg_fidelity},
      {6, "frames complete exactly once, only when fully covered",
       criterion_completion_exactly_once},
      {7, "the frames-in-flight window paces admission", criterion_backpressure},
      {8, "direct mode keeps pixel data off the head node", criterion_head_node_relief},
      {9, "larger tiles run faster, dispatcher most sensitive", criterion_tile_size_scaling},
      {10, "payload shrinks strictly with jpeg quality", criterion_quality_ladder},
      {11, "direct sustains dispatcher frame rates with 4 senders", criterion_multi_sender},
      {12, "mailbox and socket group survive randomized stress", criterion_stress_suites},
  };

  int failures = 0;
  int executed = 0;
  for (const auto& criterion : criteria) {
    if (only != 0 && criterion.number != only) continue;
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = fail(std::string("unhandled exception: ") + e.what());
    }
    if (outcome.ok)
      std::printf("PASS criterion %d: %s (%s)\n", criterion.number, criterion.title,
                  outcome.detail.c_str());
    else
      std::printf("FAIL criterion %d: %s -- %s\n", criterion.number, criterion.title,
                  outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.ok ? 0 : 1;
    ++executed;
  }

  if (failures) {
    std::printf("%d of %d criteria failed\n", failures, executed);
    return 1;
  }
  std::printf("all %d criteria passed\n", executed);
  return 0;
}
