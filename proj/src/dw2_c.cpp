// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/dw2.h"

#include <cstring>
#include <stdexcept>
#include <string>

#include "dw2/client.hpp"
#include "dw2/error.hpp"

struct dw2_session {
  std::unique_ptr<dw2::ClientSession> impl;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const char* what) {
  g_last_error = what;
  return code;
}

}  // namespace

extern "C" {

int dw2_query_info(const char* coordinator_host, uint16_t coordinator_port,
                   uint32_t* virtual_width, uint32_t* virtual_height) {
  if (!coordinator_host || !virtual_width || !virtual_height)
    return set_error(DW2_ERR_ARGUMENT, "null argument");
  try {
    dw2::WallInfo info = dw2::query_info(dw2::Endpoint{coordinator_host, coordinator_port});
    *virtual_width = info.virtual_width;
    *virtual_height = info.virtual_height;
    return DW2_OK;
  } catch (const std::exception& e) {
    return set_error(DW2_ERR_CONNECT, e.what());
  }
}

dw2_session* dw2_connect(const char* coordinator_host, uint16_t coordinator_port,
                         uint32_t peer_rank, uint32_t peer_count, int quality) {
  try {
    dw2::WallInfo info =
        dw2::query_info(dw2::Endpoint{coordinator_host ? coordinator_host : "", coordinator_port});
    dw2::ClientOptions options;
    options.quality = quality;
    auto session = new dw2_session{dw2::ClientSession::connect(info, peer_rank, peer_count, options)};
    g_last_error.clear();
    return session;
  } catch (const std::exception& e) {
    set_error(DW2_ERR_CONNECT, e.what());
    return nullptr;
  }
}

uint32_t dw2_virtual_width(const dw2_session* session) {
  return session && session->impl ? session->impl->virtual_width() : 0;
}

uint32_t dw2_virtual_height(const dw2_session* session) {
  return session && session->impl ? session->impl->virtual_height() : 0;
}

int dw2_begin_frame(dw2_session* session, uint32_t* frame_id) {
  if (!session || !session->impl || !frame_id)
    return set_error(DW2_ERR_ARGUMENT, "null session or frame_id");
  try {
    *frame_id = session->impl->begin_frame();
    return DW2_OK;
  } catch (const dw2::SessionError& e) {
    return set_error(DW2_ERR_SESSION, e.what());
  } catch (const std::exception& e) {
    return set_error(DW2_ERR_INTERNAL, e.what());
  }
}

int dw2_send_rgba(dw2_session* session, uint32_t frame_id, const uint8_t* rgba, uint32_t width,
                  uint32_t height, uint32_t x, uint32_t y) {
  if (!session || !session->impl || !rgba)
    return set_error(DW2_ERR_ARGUMENT, "null session or pixels");
  try {
    dw2::PixelBuffer pixels(width, height);
    std::memcpy(pixels.pixels.data(), rgba, pixels.byte_size());
    session->impl->send_rgba(frame_id, std::move(pixels), x, y);
    return DW2_OK;
  } catch (const dw2::SessionError& e) {
    return set_error(DW2_ERR_SESSION, e.what());
  } catch (const std::invalid_argument& e) {
    return set_error(DW2_ERR_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return set_error(DW2_ERR_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return set_error(DW2_ERR_INTERNAL, e.what());
  }
}

int dw2_disconnect(dw2_session* session) {
  if (!session || !session->impl) return set_error(DW2_ERR_ARGUMENT, "null session");
  try {
    session->impl->disconnect();
    return DW2_OK;
  } catch (const std::exception& e) {
    return set_error(DW2_ERR_INTERNAL, e.what());
  }
}

void dw2_free(dw2_session* session) { delete session; }

const char* dw2_last_error(void) { return g_last_error.c_str(); }

}  // extern "C"
