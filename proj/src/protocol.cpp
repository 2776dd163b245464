// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/protocol.hpp"

#include <cstring>
#include <limits>

#include "dw2/error.hpp"

namespace dw2 {

namespace {

constexpr uint64_t kMaxPayload = uint64_t(1) << 31;

class Writer {
 public:
  explicit Writer(std::vector<uint8_t>& out) : out_(out) {}

  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(uint8_t(v));
    out_.push_back(uint8_t(v >> 8));
  }
  void u32(uint32_t v) {
    out_.push_back(uint8_t(v));
    out_.push_back(uint8_t(v >> 8));
    out_.push_back(uint8_t(v >> 16));
    out_.push_back(uint8_t(v >> 24));
  }
  void u64(uint64_t v) {
    u32(uint32_t(v));
    u32(uint32_t(v >> 32));
  }
  void bytes(const uint8_t* p, size_t n) { out_.insert(out_.end(), p, p + n); }
  void str(const std::string& s) {
    u32(uint32_t(s.size()));
    bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }

 private:
  std::vector<uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(data_[pos_]) | uint16_t(data_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = uint32_t(data_[pos_]) | uint32_t(data_[pos_ + 1]) << 8 |
                 uint32_t(data_[pos_ + 2]) << 16 | uint32_t(data_[pos_ + 3]) << 24;
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    uint64_t lo = u32();
    return lo | uint64_t(u32()) << 32;
  }
  std::vector<uint8_t> bytes(size_t n) {
    need(n);
    std::vector<uint8_t> v(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return data_.size() - pos_; }
  void expect_end(const char* what) const {
    if (pos_ != data_.size())
      throw ProtocolError(std::string(what) + ": length mismatch (trailing bytes)");
  }

 private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n)
      throw ProtocolError("truncated frame");
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

void write_tile_header(Writer& w, const TileHeader& h) {
  w.u32(h.frame_id);
  w.u32(h.x);
  w.u32(h.y);
  w.u32(h.width);
  w.u32(h.height);
  w.u8(uint8_t(h.codec));
  w.u32(h.payload_len);
}

TileHeader read_tile_header(Reader& r) {
  TileHeader h;
  h.frame_id = r.u32();
  h.x = r.u32();
  h.y = r.u32();
  h.width = r.u32();
  h.height = r.u32();
  const uint8_t codec = r.u8();
  if (codec > uint8_t(Codec::jpeg))
    throw ProtocolError("tile: unknown codec " + std::to_string(codec));
  h.codec = Codec(codec);
  h.payload_len = r.u32();
  if (h.width < 1 || h.height < 1)
    throw ProtocolError("tile: zero extent");
  if (h.codec == Codec::raw_rgba8 && uint64_t(h.payload_len) != h.rect().area() * 4)
    throw ProtocolError("tile: raw payload_len does not match extent");
  return h;
}

}  // namespace

MsgTag tag_of(const Message& msg) {
  return std::visit(
      [](const auto& m) -> MsgTag {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, QueryInfo>) return MsgTag::query_info;
        if constexpr (std::is_same_v<T, InfoReply>) return MsgTag::info_reply;
        if constexpr (std::is_same_v<T, Register>) return MsgTag::register_peer;
        if constexpr (std::is_same_v<T, RegisterAck>) return MsgTag::register_ack;
        if constexpr (std::is_same_v<T, Tile>) return MsgTag::tile;
        if constexpr (std::is_same_v<T, DisplayFrameComplete>) return MsgTag::display_frame_complete;
        if constexpr (std::is_same_v<T, NextFrameToken>) return MsgTag::next_frame_token;
        if constexpr (std::is_same_v<T, Shutdown>) return MsgTag::shutdown;
      },
      msg);
}

std::vector<uint8_t> encode(const Message& msg) {
  std::vector<uint8_t> out;
  Writer w(out);
  w.u32(0);  // patched below
  w.u8(uint8_t(tag_of(msg)));

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, InfoReply>) {
          w.u32(m.virtual_width);
          w.u32(m.virtual_height);
          w.u8(uint8_t(m.mode));
          w.u64(m.session_token);
          w.u32(uint32_t(m.displays.size()));
          for (const InfoReplyEntry& e : m.displays) {
            w.u32(e.display_id);
            w.str(e.host);
            w.u32(e.port);
            w.u32(e.region.x);
            w.u32(e.region.y);
            w.u32(e.region.width);
            w.u32(e.region.height);
          }
        } else if constexpr (std::is_same_v<T, Register>) {
          w.u64(m.session_token);
          w.u32(m.peer_rank);
          w.u32(m.peer_count);
        } else if constexpr (std::is_same_v<T, Tile>) {
          if (m.payload.size() >= kMaxPayload)
            throw ProtocolError("tile payload exceeds 2^31 bytes");
          TileHeader h = m.header;
          h.payload_len = uint32_t(m.payload.size());
          write_tile_header(w, h);
          w.bytes(m.payload.data(), m.payload.size());
        } else if constexpr (std::is_same_v<T, DisplayFrameComplete>) {
          w.u32(m.frame_id);
          w.u32(m.display_id);
        } else if constexpr (std::is_same_v<T, NextFrameToken>) {
          w.u32(m.frame_id);
        }
        // QueryInfo, RegisterAck, Shutdown: empty body.
      },
      msg);

  const uint64_t total = out.size() - 4;
  if (total > std::numeric_limits<uint32_t>::max())
    throw ProtocolError("frame too large");
  const uint32_t len = uint32_t(total);
  out[0] = uint8_t(len);
  out[1] = uint8_t(len >> 8);
  out[2] = uint8_t(len >> 16);
  out[3] = uint8_t(len >> 24);
  return out;
}

Message decode_body(std::span<const uint8_t> data) {
  Reader r(data);
  const uint8_t tag = r.u8();
  switch (MsgTag(tag)) {
    case MsgTag::query_info: {
      r.expect_end("query_info");
      return QueryInfo{};
    }
    case MsgTag::info_reply: {
      InfoReply m;
      m.virtual_width = r.u32();
      m.virtual_height = r.u32();
      const uint8_t mode = r.u8();
      if (mode > uint8_t(Mode::direct))
        throw ProtocolError("info_reply: unknown mode");
      m.mode = Mode(mode);
      m.session_token = r.u64();
      const uint32_t count = r.u32();
      m.displays.reserve(count);
      for (uint32_t i = 0; i < count; ++i) {
        InfoReplyEntry e;
        e.display_id = r.u32();
        e.host = r.str();
        const uint32_t port = r.u32();
        if (port > 0xffff)
          throw ProtocolError("info_reply: port out of range");
        e.port = uint16_t(port);
        e.region.x = r.u32();
        e.region.y = r.u32();
        e.region.width = r.u32();
        e.region.height = r.u32();
        m.displays.push_back(std::move(e));
      }
      r.expect_end("info_reply");
      return m;
    }
    case MsgTag::register_peer: {
      Register m;
      m.session_token = r.u64();
      m.peer_rank = r.u32();
      m.peer_count = r.u32();
      r.expect_end("register");
      return m;
    }
    case MsgTag::register_ack: {
      r.expect_end("register_ack");
      return RegisterAck{};
    }
    case MsgTag::tile: {
      Tile m;
      m.header = read_tile_header(r);
      if (r.remaining() != m.header.payload_len)
        throw ProtocolError("tile: length mismatch");
      m.payload = r.bytes(m.header.payload_len);
      return m;
    }
    case MsgTag::display_frame_complete: {
      DisplayFrameComplete m;
      m.frame_id = r.u32();
      m.display_id = r.u32();
      r.expect_end("display_frame_complete");
      return m;
    }
    case MsgTag::next_frame_token: {
      NextFrameToken m;
      m.frame_id = r.u32();
      r.expect_end("next_frame_token");
      return m;
    }
    case MsgTag::shutdown: {
      r.expect_end("shutdown");
      return Shutdown{};
    }
  }
  throw ProtocolError("unknown message tag " + std::to_string(tag));
}

Message decode(std::span<const uint8_t> frame) {
  Reader r(frame);
  const uint32_t total = r.u32();
  if (frame.size() - 4 != total)
    throw ProtocolError(frame.size() - 4 < total ? "truncated frame" : "length mismatch (trailing bytes)");
  return decode_body(frame.subspan(4));
}

TileHeader peek_tile_header(std::span<const uint8_t> frame) {
  Reader r(frame);
  const uint32_t total = r.u32();
  if (total < 1)
    throw ProtocolError("truncated frame");
  const uint8_t tag = r.u8();
  if (MsgTag(tag) != MsgTag::tile)
    throw ProtocolError("not a tile frame");
  return read_tile_header(r);
}

}  // namespace dw2
