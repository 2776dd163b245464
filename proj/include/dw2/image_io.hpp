// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dw2/codec.hpp"

namespace dw2 {

/// Write RGBA8 pixels as a PNG. The file appears atomically: data goes to a
/// temporary in the same directory which is renamed over the target.
void write_png(const std::string& path, const PixelBuffer& image);

/// Load a PNG (any color type) as RGBA8.
PixelBuffer read_png(const std::string& path);

/// Nearest-neighbour rescale; used when a replay image does not match the
/// virtual framebuffer.
PixelBuffer rescale_nearest(const PixelBuffer& src, uint32_t width, uint32_t height);

}  // namespace dw2
