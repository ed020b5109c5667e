#pragma once
// PNG encode/decode (libpng) and bilinear resizing. In-memory images are
// [3,H,W] doubles in [-1,1]; files are 8-bit RGB.

#include <optional>
#include <string>
#include <vector>

#include "gfl/tensor.hpp"

namespace gfl {

void write_png(const std::string& path, const Tensor& image);

// Grid of equally sized images, `cols` per row, 2px black gutters.
void write_png_grid(const std::string& path, const std::vector<Tensor>& images, int cols);

// Empty optional when the file cannot be decoded as PNG.
std::optional<Tensor> read_png(const std::string& path);

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w);

}  // namespace gfl
