#pragma once

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "srzoo/tensor.hpp"

namespace srzoo {

// Round-half-away-from-zero to the 8-bit grid, clipped to [0, 255].
inline double quantize_u8(double v) {
  if (v <= 0.0) return 0.0;
  if (v >= 255.0) return 255.0;
  return std::floor(v + 0.5);
}

inline void quantize_image(Tensor& t) {
  for (auto& v : t.data) v = quantize_u8(v);
}

// Decodes any PNG to a (1,3,H,W) tensor of 0..255 values: 16-bit depth is
// reduced, palette and gray expand to RGB, alpha is dropped.
inline Tensor read_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open '" + path + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng: out of memory");
  }
  std::vector<png_byte> buf;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("cannot decode '" + path + "'");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  const size_t channels = rowbytes / w;  // 3 or 4 after the transforms above
  buf.resize(rowbytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = buf.data() + y * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  if (channels != 3 && channels != 4) throw DataError("'" + path + "': unsupported pixel layout");
  Tensor t(1, 3, static_cast<int64_t>(h), static_cast<int64_t>(w));
  for (int64_t y = 0; y < t.h; ++y)
    for (int64_t x = 0; x < t.w; ++x) {
      const png_byte* px = buf.data() + static_cast<size_t>(y) * rowbytes +
                           static_cast<size_t>(x) * channels;
      for (int64_t c = 0; c < 3; ++c)
        t.at(0, c, y, x) = static_cast<double>(px[c]);
    }
  return t;
}

// Writes a (1,3,H,W) tensor as 8-bit RGB; values are quantized on the way out.
inline void write_png(const std::string& path, const Tensor& img) {
  if (img.n != 1 || img.c != 3)
    throw ShapeError("write_png: expected (1,3,H,W), got " + img.shape_str());
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng: out of memory");
  }
  std::vector<png_byte> buf(static_cast<size_t>(img.h) * static_cast<size_t>(img.w) * 3);
  std::vector<png_bytep> row_ptrs(static_cast<size_t>(img.h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("cannot encode '" + path + "'");
  }
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        buf[(static_cast<size_t>(y) * static_cast<size_t>(img.w) + static_cast<size_t>(x)) * 3 +
            static_cast<size_t>(c)] = static_cast<png_byte>(quantize_u8(img.at(0, c, y, x)));
  for (int64_t y = 0; y < img.h; ++y)
    row_ptrs[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) *
                                                        static_cast<size_t>(img.w) * 3;
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("write failed for '" + path + "'");
}

}  // namespace srzoo
