// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/wall_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dw2/error.hpp"

namespace dw2 {

using nlohmann::json;

const char* to_string(Mode m) {
  return m == Mode::dispatcher ? "dispatcher" : "direct";
}

Mode parse_mode(const std::string& name) {
  if (name == "dispatcher") return Mode::dispatcher;
  if (name == "direct") return Mode::direct;
  throw ConfigError("mode: expected \"dispatcher\" or \"direct\", got \"" + name + "\"");
}

namespace {

uint32_t require_u32(const json& j, const std::string& key, uint32_t min_value) {
  if (!j.contains(key))
    throw ConfigError(key + ": missing field");
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<int64_t>() < 0 || v.get<int64_t>() > 0xffffffffll)
    throw ConfigError(key + ": expected a non-negative integer");
  const auto u = static_cast<uint32_t>(v.get<int64_t>());
  if (u < min_value)
    throw ConfigError(key + ": must be >= " + std::to_string(min_value));
  return u;
}

uint16_t require_port(const json& j, const std::string& key) {
  const uint32_t p = require_u32(j, key, 0);
  if (p > 0xffff)
    throw ConfigError(key + ": port out of range");
  return static_cast<uint16_t>(p);
}

Endpoint parse_endpoint(const json& j, const std::string& key) {
  if (!j.contains(key))
    throw ConfigError(key + ": missing field");
  const json& e = j.at(key);
  if (!e.is_object() || !e.contains("host") || !e.at("host").is_string())
    throw ConfigError(key + ".host: missing or not a string");
  return Endpoint{e.at("host").get<std::string>(), require_port(e, "port")};
}

}  // namespace

WallConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  if (!doc.is_object())
    throw ConfigError("config root: expected a JSON object");

  WallConfig cfg;
  cfg.rows = require_u32(doc, "rows", 1);
  cfg.columns = require_u32(doc, "columns", 1);
  cfg.display_width = require_u32(doc, "display_width", 1);
  cfg.display_height = require_u32(doc, "display_height", 1);
  cfg.bezel_x = doc.contains("bezel_x") ? require_u32(doc, "bezel_x", 0) : 0;
  cfg.bezel_y = doc.contains("bezel_y") ? require_u32(doc, "bezel_y", 0) : 0;
  if (!doc.contains("mode") || !doc.at("mode").is_string())
    throw ConfigError("mode: missing or not a string");
  cfg.mode = parse_mode(doc.at("mode").get<std::string>());
  cfg.frames_in_flight = doc.contains("frames_in_flight") ? require_u32(doc, "frames_in_flight", 1) : 1;
  cfg.coordinator = parse_endpoint(doc, "coordinator");
  if (doc.contains("dispatcher"))
    cfg.dispatcher = parse_endpoint(doc, "dispatcher");

  if (!doc.contains("displays") || !doc.at("displays").is_array())
    throw ConfigError("displays: missing or not an array");
  const json& arr = doc.at("displays");
  if (arr.size() != size_t(cfg.rows) * size_t(cfg.columns))
    throw ConfigError("displays: expected " + std::to_string(cfg.rows * cfg.columns) +
                      " entries (rows*columns), got " + std::to_string(arr.size()));

  cfg.displays.resize(arr.size());
  std::vector<bool> seen(arr.size(), false);
  for (size_t i = 0; i < arr.size(); ++i) {
    const json& d = arr[i];
    if (!d.is_object())
      throw ConfigError("displays[" + std::to_string(i) + "]: expected an object");
    DisplaySpec spec;
    spec.grid_row = require_u32(d, "row", 0);
    spec.grid_col = require_u32(d, "col", 0);
    if (spec.grid_row >= cfg.rows)
      throw ConfigError("displays[" + std::to_string(i) + "].row: out of range");
    if (spec.grid_col >= cfg.columns)
      throw ConfigError("displays[" + std::to_string(i) + "].col: out of range");
    if (!d.contains("host") || !d.at("host").is_string())
      throw ConfigError("displays[" + std::to_string(i) + "].host: missing or not a string");
    spec.host = d.at("host").get<std::string>();
    spec.port = require_port(d, "port");
    spec.display_id = spec.grid_row * cfg.columns + spec.grid_col;
    if (seen[spec.display_id])
      throw ConfigError("displays[" + std::to_string(i) + "]: duplicate grid cell (" +
                        std::to_string(spec.grid_row) + "," + std::to_string(spec.grid_col) + ")");
    seen[spec.display_id] = true;
    cfg.displays[spec.display_id] = spec;
  }

  validate_config(cfg);
  return cfg;
}

WallConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const WallConfig& cfg) {
  if (cfg.rows < 1 || cfg.columns < 1)
    throw ConfigError("rows/columns: must be >= 1");
  if (cfg.display_width < 1 || cfg.display_height < 1)
    throw ConfigError("display_width/display_height: must be >= 1");
  if (cfg.frames_in_flight < 1)
    throw ConfigError("frames_in_flight: must be >= 1");
  if (cfg.displays.size() != size_t(cfg.rows) * size_t(cfg.columns))
    throw ConfigError("displays: expected rows*columns entries");
  if (cfg.mode == Mode::dispatcher && !cfg.dispatcher)
    throw ConfigError("dispatcher: endpoint required when mode is \"dispatcher\"");

  std::vector<bool> seen(cfg.displays.size(), false);
  std::set<std::pair<std::string, uint16_t>> endpoints;
  endpoints.insert({cfg.coordinator.host, cfg.coordinator.port});
  if (cfg.dispatcher) {
    if (!endpoints.insert({cfg.dispatcher->host, cfg.dispatcher->port}).second &&
        cfg.dispatcher->port != 0)
      throw ConfigError("dispatcher.port: clashes with coordinator endpoint");
  }
  for (const DisplaySpec& d : cfg.displays) {
    if (d.grid_row >= cfg.rows || d.grid_col >= cfg.columns)
      throw ConfigError("displays: grid position out of range");
    const uint32_t id = d.grid_row * cfg.columns + d.grid_col;
    if (id != d.display_id)
      throw ConfigError("displays: display_id must equal row*columns+col");
    if (seen[id])
      throw ConfigError("displays: duplicate grid cell (" + std::to_string(d.grid_row) + "," +
                        std::to_string(d.grid_col) + ")");
    seen[id] = true;
    // Port 0 means "pick an ephemeral port at bind time" and cannot clash.
    if (d.port != 0 && !endpoints.insert({d.host, d.port}).second)
      throw ConfigError("displays: endpoint " + d.host + ":" + std::to_string(d.port) +
                        " clashes with another endpoint");
  }
}

std::pair<uint32_t, uint32_t> virtual_size(const WallConfig& cfg) {
  const uint32_t w = cfg.columns * cfg.display_width + (cfg.columns - 1) * cfg.bezel_x;
  const uint32_t h = cfg.rows * cfg.display_height + (cfg.rows - 1) * cfg.bezel_y;
  return {w, h};
}

Rect display_region(const WallConfig& cfg, uint32_t display_id) {
  if (display_id >= cfg.display_count())
    throw std::out_of_range("display_id " + std::to_string(display_id) + " out of range");
  const DisplaySpec& d = cfg.displays[display_id];
  return Rect{d.grid_col * (cfg.display_width + cfg.bezel_x),
              d.grid_row * (cfg.display_height + cfg.bezel_y),
              cfg.display_width, cfg.display_height};
}

std::vector<std::pair<uint32_t, Rect>> route_rect(const WallConfig& cfg, const Rect& tile) {
  if (tile.empty())
    throw std::out_of_range("route_rect: empty tile");
  const auto [vw, vh] = virtual_size(cfg);
  if (tile.x_end() > vw || tile.y_end() > vh)
    throw std::out_of_range("route_rect: tile exceeds the virtual framebuffer");

  // Displays repeat with pitch (display extent + bezel), so the candidate
  // grid cells come straight from integer division.
  const uint32_t pitch_x = cfg.display_width + cfg.bezel_x;
  const uint32_t pitch_y = cfg.display_height + cfg.bezel_y;
  const uint32_t col_lo = tile.x / pitch_x;
  const uint32_t col_hi = std::min(cfg.columns - 1, (tile.x_end() - 1) / pitch_x);
  const uint32_t row_lo = tile.y / pitch_y;
  const uint32_t row_hi = std::min(cfg.rows - 1, (tile.y_end() - 1) / pitch_y);

  std::vector<std::pair<uint32_t, Rect>> out;
  for (uint32_t row = row_lo; row <= row_hi; ++row) {
    for (uint32_t col = col_lo; col <= col_hi; ++col) {
      const uint32_t id = row * cfg.columns + col;
      const Rect overlap = intersect(tile, display_region(cfg, id));
      if (!overlap.empty())
        out.emplace_back(id, overlap);
    }
  }
  return out;
}

}  // namespace dw2
