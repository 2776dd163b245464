// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <ostream>

namespace dw2 {

/// Axis-aligned pixel rectangle in virtual-framebuffer coordinates.
/// An empty rect has width == 0 || height == 0.
struct Rect {
  uint32_t x = 0;
  uint32_t y = 0;
  uint32_t width = 0;
  uint32_t height = 0;

  constexpr bool empty() const { return width == 0 || height == 0; }
  constexpr uint64_t area() const { return uint64_t(width) * uint64_t(height); }
  constexpr uint32_t x_end() const { return x + width; }
  constexpr uint32_t y_end() const { return y + height; }

  constexpr bool contains(uint32_t px, uint32_t py) const {
    return px >= x && px < x_end() && py >= y && py < y_end();
  }

  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

constexpr Rect intersect(const Rect& a, const Rect& b) {
  const uint32_t x0 = a.x > b.x ? a.x : b.x;
  const uint32_t y0 = a.y > b.y ? a.y : b.y;
  const uint32_t x1 = a.x_end() < b.x_end() ? a.x_end() : b.x_end();
  const uint32_t y1 = a.y_end() < b.y_end() ? a.y_end() : b.y_end();
  if (x0 >= x1 || y0 >= y1)
    return Rect{};
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

inline std::ostream& operator<<(std::ostream& os, const Rect& r) {
  return os << "Rect{" << r.x << "," << r.y << "," << r.width << "," << r.height << "}";
}

}  // namespace dw2
