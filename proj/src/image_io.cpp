// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#include "dw2/image_io.hpp"

#include <cstdio>
#include <filesystem>
#include <vector>

#include <png.h>

#include "dw2/error.hpp"

namespace dw2 {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f)
      fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const PixelBuffer& image) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.byte_size())
    throw Error("write_png: inconsistent pixel buffer");

  const std::string tmp = path + ".tmp";
  FilePtr fp(fopen(tmp.c_str(), "wb"));
  if (!fp)
    throw Error("write_png: cannot open " + tmp);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("write_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("write_png: libpng error writing " + tmp);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (uint32_t y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.row(y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  fp.reset();

  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error("write_png: rename to " + path + " failed: " + ec.message());
}

PixelBuffer read_png(const std::string& path) {
  FilePtr fp(fopen(path.c_str(), "rb"));
  if (!fp)
    throw Error("read_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("read_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("read_png: libpng error reading " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  // Normalize every color type to 8-bit RGBA.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_add_alpha(png, 0xff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);

  PixelBuffer out(png_get_image_width(png, info), png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != size_t(out.width) * 4) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("read_png: unexpected row size in " + path);
  }
  std::vector<png_bytep> rows(out.height);
  for (uint32_t y = 0; y < out.height; ++y)
    rows[y] = out.row(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

PixelBuffer rescale_nearest(const PixelBuffer& src, uint32_t width, uint32_t height) {
  if (src.width == 0 || src.height == 0)
    throw Error("rescale_nearest: empty source");
  PixelBuffer out(width, height);
  for (uint32_t y = 0; y < height; ++y) {
    const uint32_t sy = uint32_t(uint64_t(y) * src.height / height);
    const uint8_t* src_row = src.row(sy);
    uint8_t* dst_row = out.row(y);
    for (uint32_t x = 0; x < width; ++x) {
      const uint32_t sx = uint32_t(uint64_t(x) * src.width / width);
      std::copy_n(src_row + size_t(sx) * 4, 4, dst_row + size_t(x) * 4);
    }
  }
  return out;
}

}  // namespace dw2
