// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0
//
// Replay benchmark: stream an image (from a PNG or a generator) to a
// loopback wall and report FPS plus byte accounting, optionally sweeping
// tile size / quality / peer count / mode.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dw2/bench.hpp"
#include "dw2/error.hpp"
#include "dw2/image_io.hpp"
#include "dw2/log.hpp"

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

int parse_quality(const std::string& q) {
  if (q == "raw") return dw2::kRawQuality;
  int value = std::stoi(q);
  if (value < 1 || value > 100) throw dw2::ConfigError("quality must be raw or 1..100");
  return value;
}

// --sweep tile=32,64,256 quality=raw,50,90 peers=1,2 mode=direct,dispatcher
dw2::SweepAxes parse_sweep(const std::string& spec) {
  dw2::SweepAxes axes;
  for (const auto& axis : split(spec, ' ')) {
    auto eq = axis.find('=');
    if (eq == std::string::npos)
      throw dw2::ConfigError("sweep axis '" + axis + "' is not name=v1,v2,...");
    const std::string name = axis.substr(0, eq);
    const auto values = split(axis.substr(eq + 1), ',');
    if (values.empty()) throw dw2::ConfigError("sweep axis '" + name + "' has no values");
    if (name == "tile" || name == "tile_size") {
      for (const auto& v : values) axes.tile_sizes.push_back(uint32_t(std::stoul(v)));
    } else if (name == "quality") {
      for (const auto& v : values) axes.qualities.push_back(parse_quality(v));
    } else if (name == "peers" || name == "clients") {
      for (const auto& v : values) axes.peer_counts.push_back(uint32_t(std::stoul(v)));
    } else if (name == "mode") {
      for (const auto& v : values) axes.modes.push_back(dw2::parse_mode(v));
    } else {
      throw dw2::ConfigError("unknown sweep axis '" + name +
                             "' (tile, quality, peers, mode)");
    }
  }
  return axes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dw2 streaming benchmark"};

  std::string config_path;
  std::string image_spec = "synthetic";
  std::string quality = "75";
  std::string sweep_spec;
  std::string out_path;
  std::string log_level = "warn";
  uint32_t tile_size = 256;
  uint32_t peers = 1;
  uint32_t frames = 32;
  uint64_t seed = 1;
  unsigned decomp_threads = 0;
  bool strict_size = false;

  app.add_option("--config", config_path, "wall configuration (JSON)")->required();
  app.add_option("--image", image_spec,
                 "PNG path, or 'synthetic' (hard to compress) / 'photographic' (smooth)");
  app.add_option("--tile-size", tile_size, "tile edge length in pixels");
  app.add_option("--quality", quality, "JPEG quality 1..100, or 'raw'");
  app.add_option("--peers", peers, "number of parallel client peers");
  app.add_option("--frames", frames, "frames per run");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--sweep", sweep_spec,
                 "space-separated axes, e.g. \"tile=32,256 mode=direct,dispatcher\"");
  app.add_option("--out", out_path, "write the CSV report here (default: stdout)");
  app.add_option("--decomp-threads", decomp_threads, "decompression threads per display");
  app.add_option("--log-level", log_level, "error | warn | info | debug");
  app.add_flag("--strict-size", strict_size, "fail instead of rescaling a mismatched image");

  CLI11_PARSE(app, argc, argv);

  try {
    dw2::log::set_level(dw2::log::parse_level(log_level));
    dw2::WallConfig config = dw2::load_config(config_path);
    const auto [vw, vh] = dw2::virtual_size(config);

    dw2::PixelBuffer image;
    if (image_spec == "synthetic")
      image = dw2::generate_synthetic(vw, vh, tile_size, seed);
    else if (image_spec == "photographic")
      image = dw2::generate_photographic(vw, vh, seed);
    else
      image = dw2::read_png(image_spec);

    dw2::ReplayOptions options;
    options.tile_size = tile_size;
    options.quality = parse_quality(quality);
    options.peers = peers;
    options.frames = frames;
    options.decomp_threads = decomp_threads;
    options.strict_size = strict_size;

    std::vector<dw2::RunRecord> records;
    if (sweep_spec.empty())
      records.push_back(dw2::run_replay(image, config, options));
    else
      records = dw2::run_sweep(image, config, options, parse_sweep(sweep_spec));

    const std::string csv = dw2::to_csv(records);
    if (out_path.empty()) {
      std::cout << csv;
    } else {
      std::ofstream out(out_path);
      if (!out) throw dw2::Error("cannot write " + out_path);
      out << csv;
      std::fprintf(stderr, "wrote %zu record(s) to %s\n", records.size(), out_path.c_str());
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
