// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dw2/rect.hpp"
#include "dw2/wall_config.hpp"

namespace dw2 {

// Wire frame: [u32 total_length][u8 tag][body], total_length = 1 + body bytes.
// All integers little-endian, 32-bit unless noted. See PROTOCOL.md for the
// worked hex dump; the layout below is the external wire contract.

enum class Codec : uint8_t { raw_rgba8 = 0, jpeg = 1 };

enum class MsgTag : uint8_t {
  query_info = 1,
  info_reply = 2,
  register_peer = 3,
  register_ack = 4,
  tile = 5,
  display_frame_complete = 6,
  next_frame_token = 7,
  shutdown = 8,
};

/// Uncompressed routing header stored in front of every tile payload.
/// The dispatcher routes on these fields alone, without touching the payload.
struct TileHeader {
  uint32_t frame_id = 0;
  uint32_t x = 0;
  uint32_t y = 0;
  uint32_t width = 0;
  uint32_t height = 0;
  Codec codec = Codec::raw_rgba8;
  uint32_t payload_len = 0;

  Rect rect() const { return Rect{x, y, width, height}; }

  friend bool operator==(const TileHeader&, const TileHeader&) = default;
};

struct QueryInfo {
  friend bool operator==(const QueryInfo&, const QueryInfo&) = default;
};

struct InfoReplyEntry {
  uint32_t display_id = 0;
  std::string host;
  uint16_t port = 0;
  Rect region;

  friend bool operator==(const InfoReplyEntry&, const InfoReplyEntry&) = default;
};

// In dispatcher mode the directory holds a single entry with
// display_id == kDispatcherDirectoryId: the dispatcher's data endpoint.
inline constexpr uint32_t kDispatcherDirectoryId = 0xffffffffu;

struct InfoReply {
  uint32_t virtual_width = 0;
  uint32_t virtual_height = 0;
  Mode mode = Mode::direct;
  uint64_t session_token = 0;
  std::vector<InfoReplyEntry> displays;

  friend bool operator==(const InfoReply&, const InfoReply&) = default;
};

struct Register {
  uint64_t session_token = 0;
  uint32_t peer_rank = 0;
  uint32_t peer_count = 0;

  friend bool operator==(const Register&, const Register&) = default;
};

struct RegisterAck {
  friend bool operator==(const RegisterAck&, const RegisterAck&) = default;
};

struct Tile {
  TileHeader header;
  std::vector<uint8_t> payload;

  friend bool operator==(const Tile&, const Tile&) = default;
};

struct DisplayFrameComplete {
  uint32_t frame_id = 0;
  uint32_t display_id = 0;

  friend bool operator==(const DisplayFrameComplete&, const DisplayFrameComplete&) = default;
};

struct NextFrameToken {
  uint32_t frame_id = 0;

  friend bool operator==(const NextFrameToken&, const NextFrameToken&) = default;
};

struct Shutdown {
  friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

using Message = std::variant<QueryInfo, InfoReply, Register, RegisterAck, Tile,
                             DisplayFrameComplete, NextFrameToken, Shutdown>;

MsgTag tag_of(const Message& msg);

/// Serialize a message into a complete wire frame (length prefix included).
/// Throws ProtocolError if a payload exceeds 2^31 bytes.
std::vector<uint8_t> encode(const Message& msg);

/// Parse a complete wire frame (length prefix included). Inverse of encode.
/// Throws ProtocolError on truncation, unknown tag, or length mismatch.
Message decode(std::span<const uint8_t> frame);

/// Parse tag + body, i.e. a frame with the length prefix already stripped
/// (what a socket reader holds after consuming the length field).
Message decode_body(std::span<const uint8_t> tag_and_body);

/// Read the tile header out of a Tile frame without touching the payload.
/// Throws ProtocolError if the frame is not a well-formed Tile prefix.
TileHeader peek_tile_header(std::span<const uint8_t> frame);

}  // namespace dw2
