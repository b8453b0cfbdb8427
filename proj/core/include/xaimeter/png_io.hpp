#pragma once

#include <filesystem>
#include <string>

#include "xaimeter/image.hpp"
#include "xaimeter/tensor.hpp"

namespace xaimeter {

/// Reads any PNG as an 8-bit RGB image (palette expanded, 16-bit scaled down,
/// gray promoted, alpha dropped).
Image read_image_png(const std::filesystem::path& path);

/// Writes an image as 8-bit RGB PNG. Lossless for valid [0,255] images.
void write_image_png(const std::filesystem::path& path, const Image& image);

/// Reads an 8- or 16-bit grayscale PNG as an {H,W} tensor of the stored
/// integer sample values. Rejects color PNGs with an explicit error.
Tensor read_gray_png(const std::filesystem::path& path);

/// Writes an {H,W} tensor as 16-bit grayscale, mapping [lo, hi] -> [0, 65535].
/// A degenerate range (hi <= lo) writes all-zero samples.
void write_gray16_png(const std::filesystem::path& path, const Tensor& hw, double lo,
                      double hi);

}  // namespace xaimeter
