// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dw2/codec.hpp"
#include "dw2/sink.hpp"
#include "dw2/wall_config.hpp"

namespace dw2 {

/// One benchmark run (one service lifetime, one client session per peer).
/// FPS is frames / wall-clock between the coordinator's first token issue
/// and the last frame completion; frame time percentiles come from the
/// completion instants on the same clock.
struct RunRecord {
  Mode mode = Mode::direct;
  uint32_t tile_size = 0;
  int quality = 0;  // kRawQuality = raw
  uint32_t clients = 0;
  uint32_t displays = 0;
  uint32_t frames = 0;
  double fps_mean = 0.0;
  double frame_time_p5_ms = 0.0;
  double frame_time_p95_ms = 0.0;
  double payload_bytes_per_frame = 0.0;    // compressed tile bytes leaving the clients
  double head_node_bytes_per_frame = 0.0;  // coordinator control + dispatcher ingress
};

struct ReplayOptions {
  uint32_t tile_size = 256;
  int quality = 75;
  uint32_t peers = 1;
  uint32_t frames = 32;
  unsigned decomp_threads = 0;
  unsigned compress_threads = 0;    // per peer; 0 = client default
  unsigned max_inflight_tiles = 0;  // per peer; 0 = client default
  std::shared_ptr<FrameSink> sink;  // observation hook; default discards
  bool strict_size = false;         // refuse (instead of rescale) a mismatched image
  std::chrono::milliseconds timeout = std::chrono::minutes(5);
};

/// Deterministic hard-to-compress test card: every tile_size block gets its
/// own tint, with per-pixel noise on top so JPEG finds nothing to exploit.
PixelBuffer generate_synthetic(uint32_t width, uint32_t height, uint32_t tile_size,
                               uint64_t seed);

/// Deterministic smooth image (low-frequency color fields plus a vignette),
/// standing in for photographic content: compresses well, no hard edges.
PixelBuffer generate_photographic(uint32_t width, uint32_t height, uint64_t seed);

/// Crop a rect out of an image.
PixelBuffer copy_rect(const PixelBuffer& src, const Rect& rect);

/// Stand up a loopback wall from `config` (ports are made ephemeral), stream
/// `image` for the configured number of frames with tiles split round-robin
/// across the peers, and collect one record. The image is rescaled with a
/// warning when its size differs from the virtual framebuffer (error when
/// strict_size).
RunRecord run_replay(const PixelBuffer& image, const WallConfig& config,
                     const ReplayOptions& options);

/// Cartesian sweep. Empty axes inherit the base option value.
struct SweepAxes {
  std::vector<uint32_t> tile_sizes;
  std::vector<int> qualities;
  std::vector<uint32_t> peer_counts;
  std::vector<Mode> modes;
};
std::vector<RunRecord> run_sweep(const PixelBuffer& image, const WallConfig& config,
                                 const ReplayOptions& base, const SweepAxes& axes);

/// CSV with a header row; columns match RunRecord field order.
std::string to_csv(const std::vector<RunRecord>& records);

}  // namespace dw2
