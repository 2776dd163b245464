// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dw2/codec.hpp"
#include "dw2/rect.hpp"

namespace dw2 {

/// Per-pixel coverage bitmap for one display frame. A frame is complete when
/// every pixel has been written at least once; overlapping tiles only count
/// the first time. Not thread-safe: callers serialize with the framebuffer
/// lock they already hold.
class FrameCoverage {
 public:
  FrameCoverage(uint32_t width, uint32_t height);

  /// Mark a rect (display-local, must already be clipped to bounds) as
  /// covered. Returns the number of pixels that were not covered before.
  uint64_t mark(const Rect& rect);

  void reset();

  bool complete() const { return covered_ == total_; }
  uint64_t covered() const { return covered_; }
  uint64_t total() const { return total_; }

 private:
  uint32_t width_ = 0;
  uint32_t height_ = 0;
  uint64_t total_ = 0;
  uint64_t covered_ = 0;
  std::vector<uint64_t> bits_;  // row-major, one bit per pixel
};

/// One display's pixels plus coverage for the frame in progress. Tiles are
/// written in display-local coordinates (possibly negative origin when a
/// tile starts on a neighbouring display) and clipped to the framebuffer.
/// Pixels persist across frames; only coverage is reset, since a frame must
/// be fully covered before it is shown.
class DisplayFramebuffer {
 public:
  DisplayFramebuffer(uint32_t width, uint32_t height);

  /// Copy `tile` so its origin lands at (x, y); parts outside the
  /// framebuffer are ignored. Returns newly covered pixels (0 when the tile
  /// lies fully outside).
  uint64_t write_tile(int64_t x, int64_t y, const PixelBuffer& tile);

  /// Forget coverage for the next frame. Pixel content is kept.
  void reset_coverage() { coverage_.reset(); }

  bool complete() const { return coverage_.complete(); }
  uint64_t covered() const { return coverage_.covered(); }
  const PixelBuffer& pixels() const { return pixels_; }
  uint32_t width() const { return pixels_.width; }
  uint32_t height() const { return pixels_.height; }

 private:
  PixelBuffer pixels_;
  FrameCoverage coverage_;
};

}  // namespace dw2
