// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "dw2/codec.hpp"

namespace dw2 {

/// Where completed display frames go. frame_complete is called once per
/// display per completed frame, from that display's completion thread, with
/// the display's full frame; implementations must tolerate concurrent calls
/// for different displays.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void frame_complete(uint32_t display_id, uint32_t frame_id,
                              const PixelBuffer& pixels) = 0;
};

/// Discards frames; the default for benchmarking.
class NullSink : public FrameSink {
 public:
  void frame_complete(uint32_t, uint32_t, const PixelBuffer&) override {}
};

/// Writes frame%05u_display%02u.png into a directory (created if missing).
class PngDirectorySink : public FrameSink {
 public:
  explicit PngDirectorySink(std::string directory);
  void frame_complete(uint32_t display_id, uint32_t frame_id,
                      const PixelBuffer& pixels) override;

 private:
  std::string directory_;
};

/// Forwards frames to a callable; handy in tests.
class CallbackSink : public FrameSink {
 public:
  using Fn = std::function<void(uint32_t display_id, uint32_t frame_id, const PixelBuffer&)>;
  explicit CallbackSink(Fn fn) : fn_(std::move(fn)) {}
  void frame_complete(uint32_t display_id, uint32_t frame_id,
                      const PixelBuffer& pixels) override {
    fn_(display_id, frame_id, pixels);
  }

 private:
  Fn fn_;
};

/// Parse a sink spec: "null" or "png:<directory>".
/// Throws ConfigError on anything else.
std::shared_ptr<FrameSink> make_sink(const std::string& spec);

}  // namespace dw2
