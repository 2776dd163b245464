// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dw2/protocol.hpp"

namespace dw2 {

/// Row-major RGBA8 pixels, 4 bytes per pixel, no row padding.
struct PixelBuffer {
  uint32_t width = 0;
  uint32_t height = 0;
  std::vector<uint8_t> pixels;

  PixelBuffer() = default;
  PixelBuffer(uint32_t w, uint32_t h) : width(w), height(h), pixels(size_t(w) * h * 4, 0) {}

  size_t byte_size() const { return size_t(width) * height * 4; }
  uint8_t* row(uint32_t y) { return pixels.data() + size_t(y) * width * 4; }
  const uint8_t* row(uint32_t y) const { return pixels.data() + size_t(y) * width * 4; }

  friend bool operator==(const PixelBuffer&, const PixelBuffer&) = default;
};

struct Compressed {
  Codec codec = Codec::raw_rgba8;
  std::vector<uint8_t> payload;
};

// Quality value selecting the raw (lossless) path in compress().
inline constexpr int kRawQuality = 0;

/// Compress a tile payload. quality == kRawQuality copies the pixel bytes
/// verbatim (codec raw_rgba8); quality 1..100 produces a baseline 4:2:0
/// JPEG of the RGB channels (alpha discarded). Encoder settings are fixed
/// so payload sizes are comparable across runs.
/// Throws CodecError on a zero-sized buffer or out-of-range quality.
Compressed compress(const PixelBuffer& pixels, int quality);

/// Inverse of compress for the given dimensions. Raw payloads round-trip
/// bit-exactly; JPEG decodes with alpha forced opaque.
/// Throws CodecError on corrupt payload or dimension mismatch.
PixelBuffer decompress(Codec codec, const std::vector<uint8_t>& payload,
                       uint32_t width, uint32_t height);

/// Peak signal-to-noise ratio over the RGB channels (alpha ignored),
/// in dB; +infinity for identical buffers.
/// Throws CodecError when dimensions differ.
double psnr(const PixelBuffer& a, const PixelBuffer& b);

}  // namespace dw2
