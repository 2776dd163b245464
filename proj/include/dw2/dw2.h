/* Copyright 2026 the dw2 authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Foreign-function surface of the client library: plain-data arguments,
 * integer status codes, opaque session handle. Mirrors the C++ API in
 * dw2/client.hpp one to one; see docs/client_api.md for the walkthrough.
 */

#ifndef DW2_DW2_H_
#define DW2_DW2_H_

#include <stdint.h>
#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct dw2_session dw2_session;

enum {
  DW2_OK = 0,
  DW2_ERR_CONNECT = 1,   /* coordinator or display unreachable / refused */
  DW2_ERR_SESSION = 2,   /* session over, frame not admitted, misuse */
  DW2_ERR_ARGUMENT = 3,  /* bad geometry or parameter */
  DW2_ERR_INTERNAL = 4,
};

/* Queries the wall geometry without joining a session. */
int dw2_query_info(const char* coordinator_host, uint16_t coordinator_port,
                   uint32_t* virtual_width, uint32_t* virtual_height);

/* quality: 0 sends raw RGBA, 1..100 selects JPEG.
 * Returns NULL on failure; dw2_last_error() has the reason. */
dw2_session* dw2_connect(const char* coordinator_host, uint16_t coordinator_port,
                         uint32_t peer_rank, uint32_t peer_count, int quality);

/* Virtual framebuffer extent of the connected wall. */
uint32_t dw2_virtual_width(const dw2_session* session);
uint32_t dw2_virtual_height(const dw2_session* session);

/* Blocks until the next frame is admitted; writes its id to *frame_id. */
int dw2_begin_frame(dw2_session* session, uint32_t* frame_id);

/* rgba: width*height*4 bytes, row-major, no padding. (x, y) is the tile
 * origin in virtual coordinates. Asynchronous: returns once enqueued. */
int dw2_send_rgba(dw2_session* session, uint32_t frame_id, const uint8_t* rgba,
                  uint32_t width, uint32_t height, uint32_t x, uint32_t y);

/* Flushes pending tiles and leaves the session. Safe to call twice. */
int dw2_disconnect(dw2_session* session);

/* Destroys the handle (disconnecting first if needed). */
void dw2_free(dw2_session* session);

/* Message for the most recent failure on this thread; empty string if none. */
const char* dw2_last_error(void);

#ifdef __cplusplus
}
#endif

#endif /* DW2_DW2_H_ */
