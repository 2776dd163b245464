// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/frame_state.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

namespace dw2 {

FrameCoverage::FrameCoverage(uint32_t width, uint32_t height)
    : width_(width),
      height_(height),
      total_(uint64_t(width) * height),
      bits_((total_ + 63) / 64, 0) {
  if (width == 0 || height == 0) throw std::invalid_argument("coverage dimensions must be positive");
}

uint64_t FrameCoverage::mark(const Rect& rect) {
  if (rect.empty()) return 0;
  if (rect.x_end() > width_ || rect.y_end() > height_)
    throw std::out_of_range("coverage mark outside framebuffer");

  uint64_t newly = 0;
  for (uint32_t y = rect.y; y < rect.y_end(); ++y) {
    uint64_t begin = uint64_t(y) * width_ + rect.x;
    uint64_t end = begin + rect.width;
    // Walk the span word by word, masking partial words at the edges.
    for (uint64_t word = begin / 64; word <= (end - 1) / 64; ++word) {
      uint64_t lo = std::max(begin, word * 64) - word * 64;
      uint64_t hi = std::min(end, (word + 1) * 64) - word * 64;
      uint64_t mask = (hi - lo == 64) ? ~uint64_t(0) : (((uint64_t(1) << (hi - lo)) - 1) << lo);
      newly += std::popcount(mask & ~bits_[word]);
      bits_[word] |= mask;
    }
  }
  covered_ += newly;
  return newly;
}

void FrameCoverage::reset() {
  std::fill(bits_.begin(), bits_.end(), 0);
  covered_ = 0;
}

DisplayFramebuffer::DisplayFramebuffer(uint32_t width, uint32_t height)
    : pixels_(width, height), coverage_(width, height) {}

uint64_t DisplayFramebuffer::write_tile(int64_t x, int64_t y, const PixelBuffer& tile) {
  // Clip the tile to [0, width) x [0, height) in display-local coordinates.
  int64_t x0 = std::max<int64_t>(x, 0);
  int64_t y0 = std::max<int64_t>(y, 0);
  int64_t x1 = std::min<int64_t>(x + tile.width, pixels_.width);
  int64_t y1 = std::min<int64_t>(y + tile.height, pixels_.height);
  if (x0 >= x1 || y0 >= y1) return 0;

  const size_t row_bytes = size_t(x1 - x0) * 4;
  for (int64_t row = y0; row < y1; ++row) {
    const uint8_t* src = tile.row(uint32_t(row - y)) + size_t(x0 - x) * 4;
    std::memcpy(pixels_.row(uint32_t(row)) + size_t(x0) * 4, src, row_bytes);
  }
  return coverage_.mark(
      Rect{uint32_t(x0), uint32_t(y0), uint32_t(x1 - x0), uint32_t(y1 - y0)});
}

}  // namespace dw2
