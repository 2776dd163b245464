// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/codec.hpp"

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <limits>

#include <jpeglib.h>

#include "dw2/error.hpp"

namespace dw2 {

namespace {

// libjpeg reports errors through a callback; convert to CodecError via longjmp.
struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  longjmp(err->jump, 1);
}

void jpeg_silence_output(j_common_ptr, int) {}

JpegErrorMgr* install_error_mgr(j_common_ptr cinfo, JpegErrorMgr* err) {
  cinfo->err = jpeg_std_error(&err->pub);
  err->pub.error_exit = jpeg_error_exit;
  err->pub.emit_message = jpeg_silence_output;
  return err;
}

}  // namespace

Compressed compress(const PixelBuffer& buf, int quality) {
  if (buf.width == 0 || buf.height == 0 || buf.pixels.size() != buf.byte_size())
    throw CodecError("compress: zero-sized or inconsistent pixel buffer");
  if (quality == kRawQuality)
    return Compressed{Codec::raw_rgba8, buf.pixels};
  if (quality < 1 || quality > 100)
    throw CodecError("compress: quality must be 1..100 or raw");

  jpeg_compress_struct cinfo;
  JpegErrorMgr err;
  install_error_mgr(reinterpret_cast<j_common_ptr>(&cinfo), &err);

  unsigned char* out_buf = nullptr;
  unsigned long out_size = 0;
  std::vector<uint8_t> rgb_row(size_t(buf.width) * 3);

  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    if (out_buf)
      free(out_buf);
    throw CodecError(std::string("jpeg compress failed: ") + err.message);
  }

  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &out_buf, &out_size);
  cinfo.image_width = buf.width;
  cinfo.image_height = buf.height;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);  // 4:2:0 chroma subsampling
  jpeg_set_quality(&cinfo, quality, TRUE /* baseline */);
  jpeg_start_compress(&cinfo, TRUE);

  while (cinfo.next_scanline < cinfo.image_height) {
    const uint8_t* src = buf.row(cinfo.next_scanline);
    for (uint32_t x = 0; x < buf.width; ++x) {
      rgb_row[x * 3 + 0] = src[x * 4 + 0];
      rgb_row[x * 3 + 1] = src[x * 4 + 1];
      rgb_row[x * 3 + 2] = src[x * 4 + 2];
    }
    JSAMPROW row = rgb_row.data();
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  Compressed out{Codec::jpeg, std::vector<uint8_t>(out_buf, out_buf + out_size)};
  free(out_buf);
  return out;
}

PixelBuffer decompress(Codec codec, const std::vector<uint8_t>& payload,
                       uint32_t width, uint32_t height) {
  if (width == 0 || height == 0)
    throw CodecError("decompress: zero extent");

  if (codec == Codec::raw_rgba8) {
    if (payload.size() != size_t(width) * height * 4)
      throw CodecError("decompress: raw payload size does not match dimensions");
    PixelBuffer out;
    out.width = width;
    out.height = height;
    out.pixels = payload;
    return out;
  }

  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  install_error_mgr(reinterpret_cast<j_common_ptr>(&cinfo), &err);

  PixelBuffer out(width, height);
  std::vector<uint8_t> rgb_row(size_t(width) * 3);

  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw CodecError(std::string("jpeg decompress failed: ") + err.message);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, payload.data(), payload.size());
  if (jpeg_read_header(&cinfo, TRUE) != JPEG_HEADER_OK) {
    jpeg_destroy_decompress(&cinfo);
    throw CodecError("jpeg decompress failed: bad header");
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  if (cinfo.output_width != width || cinfo.output_height != height) {
    // Matches the spec'd tile contract: the header extent is authoritative.
    jpeg_abort_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    throw CodecError("jpeg decompress: dimension mismatch");
  }
  while (cinfo.output_scanline < cinfo.output_height) {
    const uint32_t y = cinfo.output_scanline;
    JSAMPROW row = rgb_row.data();
    jpeg_read_scanlines(&cinfo, &row, 1);
    uint8_t* dst = out.row(y);
    for (uint32_t x = 0; x < width; ++x) {
      dst[x * 4 + 0] = rgb_row[x * 3 + 0];
      dst[x * 4 + 1] = rgb_row[x * 3 + 1];
      dst[x * 4 + 2] = rgb_row[x * 3 + 2];
      dst[x * 4 + 3] = 0xff;
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

double psnr(const PixelBuffer& a, const PixelBuffer& b) {
  if (a.width != b.width || a.height != b.height)
    throw CodecError("psnr: dimension mismatch");
  uint64_t sum_sq = 0;
  const size_t n = size_t(a.width) * a.height;
  for (size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int d = int(a.pixels[i * 4 + c]) - int(b.pixels[i * 4 + c]);
      sum_sq += uint64_t(d * d);
    }
  }
  if (sum_sq == 0)
    return std::numeric_limits<double>::infinity();
  const double mse = double(sum_sq) / (double(n) * 3.0);
  return 20.0 * std::log10(255.0) - 10.0 * std::log10(mse);
}

}  // namespace dw2
