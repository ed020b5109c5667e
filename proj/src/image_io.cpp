#include "gfl/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "op_detail.hpp"

namespace gfl {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

unsigned char to_byte(double v) {
  const double scaled = (std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 255.0;
  return static_cast<unsigned char>(std::lround(scaled));
}

void write_rgb8(const std::string& path, const std::vector<unsigned char>& rgb, int64_t h,
                int64_t w) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  detail::require(fp != nullptr, "png: cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  detail::require(png != nullptr, "png: writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    detail::fail("png: write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + y * w * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const std::string& path, const Tensor& image) {
  detail::require(image.rank() == 3 && image.dim(0) == 3, "write_png: [3,H,W] image required");
  const int64_t h = image.dim(1), w = image.dim(2);
  std::vector<unsigned char> rgb(static_cast<size_t>(h * w * 3));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        rgb[static_cast<size_t>((y * w + x) * 3 + c)] = to_byte(image.at(c, y, x));
  write_rgb8(path, rgb, h, w);
}

void write_png_grid(const std::string& path, const std::vector<Tensor>& images, int cols) {
  detail::require(!images.empty(), "write_png_grid: no images");
  detail::require(cols >= 1, "write_png_grid: cols must be positive");
  const int64_t ih = images[0].dim(1), iw = images[0].dim(2);
  const int rows = static_cast<int>((images.size() + static_cast<size_t>(cols) - 1) /
                                    static_cast<size_t>(cols));
  const int64_t gutter = 2;
  const int64_t gh = rows * ih + (rows - 1) * gutter;
  const int64_t gw = cols * iw + (cols - 1) * gutter;
  std::vector<unsigned char> rgb(static_cast<size_t>(gh * gw * 3), 0);
  for (size_t i = 0; i < images.size(); ++i) {
    detail::require(images[i].rank() == 3 && images[i].dim(1) == ih && images[i].dim(2) == iw,
                    "write_png_grid: image size mismatch");
    const int64_t row = static_cast<int64_t>(i) / cols;
    const int64_t col = static_cast<int64_t>(i) % cols;
    const int64_t oy = row * (ih + gutter), ox = col * (iw + gutter);
    for (int64_t y = 0; y < ih; ++y)
      for (int64_t x = 0; x < iw; ++x)
        for (int64_t c = 0; c < 3; ++c)
          rgb[static_cast<size_t>(((oy + y) * gw + ox + x) * 3 + c)] =
              to_byte(images[i].at(c, y, x));
  }
  write_rgb8(path, rgb, gh, gw);
}

std::optional<Tensor> read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) return std::nullopt;
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) return std::nullopt;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return std::nullopt;
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> data;
  std::vector<png_bytep> row_ptrs;
  png_uint_32 w = 0, h = 0;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    return std::nullopt;
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  // Normalize every color type / bit depth to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes < static_cast<size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    return std::nullopt;
  }
  data.resize(static_cast<size_t>(h) * rowbytes);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = data.data() + y * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor img({3, static_cast<int64_t>(h), static_cast<int64_t>(w)});
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) =
            static_cast<double>(data[y * rowbytes + static_cast<size_t>(x) * 3 +
                                     static_cast<size_t>(c)]) /
                255.0 * 2.0 -
            1.0;
  return img;
}

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w) {
  detail::require(image.rank() == 3, "resize_bilinear: [C,H,W] required");
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out({c, out_h, out_w});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < out_h; ++y)
      for (int64_t x = 0; x < out_w; ++x) {
        const double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(h) /
                              static_cast<double>(out_h) -
                          0.5;
        const double sx = (static_cast<double>(x) + 0.5) * static_cast<double>(w) /
                              static_cast<double>(out_w) -
                          0.5;
        const int64_t y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sy)), 0, h - 1);
        const int64_t x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(sx)), 0, w - 1);
        const int64_t y1 = std::min<int64_t>(y0 + 1, h - 1);
        const int64_t x1 = std::min<int64_t>(x0 + 1, w - 1);
        const double fy = std::clamp(sy - static_cast<double>(y0), 0.0, 1.0);
        const double fx = std::clamp(sx - static_cast<double>(x0), 0.0, 1.0);
        out.at(ch, y, x) = (1 - fy) * ((1 - fx) * image.at(ch, y0, x0) + fx * image.at(ch, y0, x1)) +
                           fy * ((1 - fx) * image.at(ch, y1, x0) + fx * image.at(ch, y1, x1));
      }
  return out;
}

}  // namespace gfl
