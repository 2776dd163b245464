// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dw2/rect.hpp"

namespace dw2 {

enum class Mode : uint8_t { dispatcher = 0, direct = 1 };

const char* to_string(Mode m);
Mode parse_mode(const std::string& name);

struct Endpoint {
  std::string host;
  uint16_t port = 0;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct DisplaySpec {
  uint32_t display_id = 0;  // row-major: row * columns + col
  uint32_t grid_row = 0;
  uint32_t grid_col = 0;
  std::string host;
  uint16_t port = 0;  // direct-mode data endpoint; 0 lets the process pick an ephemeral port
};

/// Wall geometry plus service endpoints. The grid is uniform: every display
/// has the same pixel extent and bezels are uniform between neighbours.
/// Immutable once parsed; safe to share across threads.
struct WallConfig {
  uint32_t columns = 0;
  uint32_t rows = 0;
  uint32_t display_width = 0;
  uint32_t display_height = 0;
  uint32_t bezel_x = 0;  // dead pixels between horizontally adjacent displays
  uint32_t bezel_y = 0;
  Mode mode = Mode::direct;
  uint32_t frames_in_flight = 1;
  Endpoint coordinator;
  std::optional<Endpoint> dispatcher;  // required when mode == dispatcher
  std::vector<DisplaySpec> displays;   // indexed by display_id

  uint32_t display_count() const { return rows * columns; }
};

/// Parse and validate a JSON wall description.
/// Throws ConfigError naming the offending key on syntax errors, missing
/// fields, non-positive dimensions, duplicate grid cells, or port clashes.
WallConfig parse_config(const std::string& text);

/// parse_config over the contents of a file.
WallConfig load_config(const std::string& path);

/// Validate an already-populated WallConfig (parse_config calls this).
void validate_config(const WallConfig& config);

/// Total virtual framebuffer extent. Bezels between displays occupy virtual
/// pixels so imagery stays continuous across the physical gaps.
std::pair<uint32_t, uint32_t> virtual_size(const WallConfig& config);

/// The region of the virtual framebuffer shown by one display.
/// Throws std::out_of_range for an invalid display_id.
Rect display_region(const WallConfig& config, uint32_t display_id);

/// Every display whose region intersects `tile`, with the intersection in
/// virtual coordinates. Empty iff the tile lies entirely in bezel strips.
/// Throws std::out_of_range if the tile exceeds the virtual framebuffer.
std::vector<std::pair<uint32_t, Rect>> route_rect(const WallConfig& config, const Rect& tile);

}  // namespace dw2
