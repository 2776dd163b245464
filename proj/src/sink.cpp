// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/sink.hpp"

#include <cstdio>
#include <filesystem>

#include "dw2/error.hpp"
#include "dw2/image_io.hpp"

namespace dw2 {

PngDirectorySink::PngDirectorySink(std::string directory) : directory_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) throw ConfigError("sink: cannot create directory '" + directory_ + "': " + ec.message());
}

void PngDirectorySink::frame_complete(uint32_t display_id, uint32_t frame_id,
                                      const PixelBuffer& pixels) {
  char name[64];
  std::snprintf(name, sizeof(name), "frame%05u_display%02u.png", frame_id, display_id);
  write_png((std::filesystem::path(directory_) / name).string(), pixels);
}

std::shared_ptr<FrameSink> make_sink(const std::string& spec) {
  if (spec == "null") return std::make_shared<NullSink>();
  if (spec.rfind("png:", 0) == 0) {
    std::string dir = spec.substr(4);
    if (dir.empty()) throw ConfigError("sink: png spec needs a directory, e.g. png:frames");
    return std::make_shared<PngDirectorySink>(dir);
  }
  if (spec == "window")
    throw ConfigError("sink: no window sink in this build (headless); use png:<dir> or null");
  throw ConfigError("sink: unknown spec '" + spec + "' (expected null or png:<directory>)");
}

}  // namespace dw2
