#pragma once

#include <string>
#include <vector>

#include "ani/common.hpp"

namespace ani {

/// Interleaved RGB, row-major, values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
};

/// PNG (8/16-bit) or binary PPM (P6), selected by file magic.
RgbImage load_image(const std::string& path);

/// Writes PPM for a ".ppm" suffix, PNG otherwise. Values are clamped to
/// [0, 1] and rounded to 8 bits.
void save_image(const RgbImage& img, const std::string& path);

RgbImage crop(const RgbImage& img, int x, int y, int w, int h);

/// Box filter over factor x factor blocks; trailing rows/cols that do not
/// fill a block are dropped.
RgbImage downscale(const RgbImage& img, int factor);

/// (H*W) x 3 target matrix in row-major pixel order.
Matrix image_to_targets(const RgbImage& img);

/// Inverse of image_to_targets; clamps to [0, 1] for display.
RgbImage targets_to_image(const Matrix& rgb, int height, int width);

}  // namespace ani
