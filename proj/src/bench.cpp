// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/bench.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "dw2/client.hpp"
#include "dw2/display_service.hpp"
#include "dw2/error.hpp"
#include "dw2/image_io.hpp"
#include "dw2/log.hpp"

namespace dw2 {
namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double percentile(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  // Nearest-rank on the already-sorted sample.
  size_t rank = size_t(std::ceil(p / 100.0 * double(sorted.size())));
  rank = std::min(std::max<size_t>(rank, 1), sorted.size());
  return sorted[rank - 1];
}

}  // namespace

PixelBuffer generate_synthetic(uint32_t width, uint32_t height, uint32_t tile_size,
                               uint64_t seed) {
  if (width == 0 || height == 0 || tile_size == 0)
    throw std::invalid_argument("generate_synthetic: dimensions and tile_size must be positive");
  PixelBuffer image(width, height);
  for (uint32_t y = 0; y < height; ++y) {
    uint8_t* row = image.row(y);
    for (uint32_t x = 0; x < width; ++x) {
      // Block tint keeps large structure visible; per-pixel noise keeps the
      // content incompressible inside every block.
      uint64_t block = splitmix64(seed ^ (uint64_t(y / tile_size) << 32 | (x / tile_size)));
      uint64_t noise = splitmix64(seed ^ (uint64_t(y) << 32 | x) ^ 0xa5a5a5a5a5a5a5a5ull);
      for (int c = 0; c < 3; ++c) {
        uint8_t tint = uint8_t(block >> (8 * c));
        uint8_t n = uint8_t(noise >> (8 * c));
        row[size_t(x) * 4 + c] = uint8_t((tint >> 1) + (n >> 1));
      }
      row[size_t(x) * 4 + 3] = 0xff;
    }
  }
  return image;
}

PixelBuffer generate_photographic(uint32_t width, uint32_t height, uint64_t seed) {
  if (width == 0 || height == 0)
    throw std::invalid_argument("generate_photographic: dimensions must be positive");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> freq(0.5, 3.0);
  std::uniform_real_distribution<double> phase(0.0, 6.28318530717958648);
  double fx[3], fy[3], ph[3];
  for (int c = 0; c < 3; ++c) {
    fx[c] = freq(gen);
    fy[c] = freq(gen);
    ph[c] = phase(gen);
  }
  const double cx = 0.3 + 0.4 * std::uniform_real_distribution<double>(0, 1)(gen);
  const double cy = 0.3 + 0.4 * std::uniform_real_distribution<double>(0, 1)(gen);

  PixelBuffer image(width, height);
  for (uint32_t y = 0; y < height; ++y) {
    uint8_t* row = image.row(y);
    const double v = double(y) / double(height);
    for (uint32_t x = 0; x < width; ++x) {
      const double u = double(x) / double(width);
      const double d = std::sqrt((u - cx) * (u - cx) + (v - cy) * (v - cy));
      const double vignette = 1.0 - 0.45 * d;
      for (int c = 0; c < 3; ++c) {
        double s = 0.55 + 0.35 * std::sin(6.28318530717958648 * (fx[c] * u + fy[c] * v) + ph[c]);
        double value = 255.0 * s * vignette;
        row[size_t(x) * 4 + c] = uint8_t(std::clamp(value, 0.0, 255.0));
      }
      row[size_t(x) * 4 + 3] = 0xff;
    }
  }
  return image;
}

PixelBuffer copy_rect(const PixelBuffer& src, const Rect& rect) {
  if (rect.x_end() > src.width || rect.y_end() > src.height)
    throw std::out_of_range("copy_rect: rect outside image");
  PixelBuffer out(rect.width, rect.height);
  for (uint32_t y = 0; y < rect.height; ++y)
    std::copy_n(src.row(rect.y + y) + size_t(rect.x) * 4, size_t(rect.width) * 4, out.row(y));
  return out;
}

RunRecord run_replay(const PixelBuffer& image, const WallConfig& config,
                     const ReplayOptions& options) {
  if (options.frames == 0 || options.peers == 0 || options.tile_size == 0)
    throw std::invalid_argument("run_replay: frames, peers and tile_size must be positive");

  // Fresh loopback service per run; ephemeral ports so back-to-back runs
  // never collide.
  WallConfig cfg = config;
  cfg.coordinator.port = 0;
  for (auto& d : cfg.displays) d.port = 0;
  if (cfg.dispatcher) cfg.dispatcher->port = 0;

  const auto [vw, vh] = virtual_size(cfg);
  PixelBuffer frame_image;
  const PixelBuffer* source = &image;
  if (image.width != vw || image.height != vh) {
    if (options.strict_size)
      throw Error("run_replay: image is " + std::to_string(image.width) + "x" +
                  std::to_string(image.height) + " but the wall is " + std::to_string(vw) + "x" +
                  std::to_string(vh));
    LOG_WARN("bench: rescaling %ux%u image to the %ux%u virtual framebuffer", image.width,
             image.height, vw, vh);
    frame_image = rescale_nearest(image, vw, vh);
    source = &frame_image;
  }

  // Static round-robin tile partition, identical every frame (replay).
  std::vector<Rect> tiles;
  for (uint32_t y = 0; y < vh; y += options.tile_size)
    for (uint32_t x = 0; x < vw; x += options.tile_size)
      tiles.push_back(Rect{x, y, std::min(options.tile_size, vw - x),
                           std::min(options.tile_size, vh - y)});

  LocalWallOptions wall_options;
  wall_options.sink = options.sink;
  wall_options.decomp_threads = options.decomp_threads;
  LocalWall wall(cfg, wall_options);

  std::vector<std::thread> peers;
  std::vector<ClientSession::Stats> peer_stats(options.peers);
  std::vector<std::string> peer_errors(options.peers);
  for (uint32_t rank = 0; rank < options.peers; ++rank) {
    peers.emplace_back([&, rank] {
      try {
        std::vector<std::pair<Rect, PixelBuffer>> mine;
        for (size_t i = rank; i < tiles.size(); i += options.peers)
          mine.emplace_back(tiles[i], copy_rect(*source, tiles[i]));

        WallInfo info = query_info(wall.coordinator_endpoint());
        ClientOptions copts;
        copts.quality = options.quality;
        if (options.compress_threads) copts.compress_threads = options.compress_threads;
        if (options.max_inflight_tiles) copts.max_inflight_tiles = options.max_inflight_tiles;
        auto session = ClientSession::connect(info, rank, options.peers, copts);
        for (uint32_t f = 0; f < options.frames; ++f) {
          auto frame_id = session->try_begin_frame(options.timeout);
          if (!frame_id) throw Error("run_replay: begin_frame timed out");
          for (auto& [rect, pixels] : mine)
            session->send_rgba(*frame_id, pixels, rect.x, rect.y);
        }
        session->disconnect();
        peer_stats[rank] = session->stats();
      } catch (const std::exception& e) {
        peer_errors[rank] = e.what();
      }
    });
  }
  for (auto& p : peers) p.join();
  for (uint32_t rank = 0; rank < options.peers; ++rank) {
    if (!peer_errors[rank].empty()) {
      wall.stop();
      throw Error("run_replay: peer " + std::to_string(rank) + ": " + peer_errors[rank]);
    }
  }
  if (!wall.wait_session_end(options.timeout)) {
    wall.stop();
    throw Error("run_replay: service did not wind down in time");
  }

  auto timeline = wall.coordinator().timeline();
  uint64_t control_bytes = wall.coordinator().control_bytes();
  uint64_t dispatcher_ingress = 0;
  if (wall.dispatcher()) {
    // Count what the head node actually received from clients, wire framing
    // included.
    dispatcher_ingress = wall.dispatcher()->stats().payload_bytes_in;
  }
  wall.stop();

  if (!timeline.started || timeline.completions.size() != options.frames)
    throw Error("run_replay: expected " + std::to_string(options.frames) +
                " completed frames, saw " + std::to_string(timeline.completions.size()));

  RunRecord record;
  record.mode = cfg.mode;
  record.tile_size = options.tile_size;
  record.quality = options.quality;
  record.clients = options.peers;
  record.displays = uint32_t(cfg.displays.size());
  record.frames = options.frames;

  std::vector<double> frame_ms;
  auto prev = timeline.session_start;
  for (const auto& t : timeline.completions) {
    frame_ms.push_back(std::chrono::duration<double, std::milli>(t - prev).count());
    prev = t;
  }
  const double total_s =
      std::chrono::duration<double>(timeline.completions.back() - timeline.session_start).count();
  record.fps_mean = total_s > 0 ? double(options.frames) / total_s : 0.0;
  std::sort(frame_ms.begin(), frame_ms.end());
  record.frame_time_p5_ms = percentile(frame_ms, 5);
  record.frame_time_p95_ms = percentile(frame_ms, 95);

  uint64_t payload = 0;
  for (const auto& s : peer_stats) payload += s.payload_bytes;
  record.payload_bytes_per_frame = double(payload) / options.frames;
  record.head_node_bytes_per_frame =
      double(control_bytes + dispatcher_ingress) / options.frames;
  return record;
}

std::vector<RunRecord> run_sweep(const PixelBuffer& image, const WallConfig& config,
                                 const ReplayOptions& base, const SweepAxes& axes) {
  auto tile_sizes = axes.tile_sizes.empty() ? std::vector<uint32_t>{base.tile_size} : axes.tile_sizes;
  auto qualities = axes.qualities.empty() ? std::vector<int>{base.quality} : axes.qualities;
  auto peer_counts = axes.peer_counts.empty() ? std::vector<uint32_t>{base.peers} : axes.peer_counts;
  auto modes = axes.modes.empty() ? std::vector<Mode>{config.mode} : axes.modes;

  std::vector<RunRecord> records;
  for (Mode mode : modes) {
    WallConfig cfg = config;
    cfg.mode = mode;
    if (mode == Mode::dispatcher && !cfg.dispatcher)
      cfg.dispatcher = Endpoint{cfg.coordinator.host, 0};
    for (uint32_t ts : tile_sizes) {
      for (int q : qualities) {
        for (uint32_t p : peer_counts) {
          ReplayOptions options = base;
          options.tile_size = ts;
          options.quality = q;
          options.peers = p;
          LOG_INFO("bench: run mode=%s tile=%u quality=%d peers=%u frames=%u", to_string(mode),
                   ts, q, p, options.frames);
          records.push_back(run_replay(image, cfg, options));
        }
      }
    }
  }
  return records;
}

std::string to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "mode,tile_size,quality,clients,displays,frames,fps_mean,"
         "frame_time_p5_ms,frame_time_p95_ms,payload_bytes_per_frame,"
         "head_node_bytes_per_frame\n";
  for (const auto& r : records) {
    out << to_string(r.mode) << ',' << r.tile_size << ',';
    if (r.quality == kRawQuality)
      out << "raw";
    else
      out << r.quality;
    out << ',' << r.clients << ',' << r.displays << ',' << r.frames << ',' << r.fps_mean << ','
        << r.frame_time_p5_ms << ',' << r.frame_time_p95_ms << ',' << r.payload_bytes_per_frame
        << ',' << r.head_node_bytes_per_frame << '\n';
  }
  return out.str();
}

}  // namespace dw2
