#pragma once

// Binary PPM (P6) images: a lossless format readable without extra libraries.

#include <Eigen/Dense>

#include <string>

namespace poar {

/// RGB image with channel values in [0, 1], HWC layout.
struct Image {
  int width = 0;
  int height = 0;
  Eigen::VectorXd data;

  Image() = default;
  Image(int w, int h, double fill = 0.0);
  double& at(int y, int x, int c) { return data[(static_cast<Eigen::Index>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<Eigen::Index>(y) * width + x) * 3 + c];
  }
};

/// Square image from an HWC vector of side `size`.
Image image_from_hwc(const Eigen::VectorXd& hwc, int size);

/// Values are clamped to [0, 1] and quantized to 8 bits.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

/// Places `b` to the right of `a` (heights must match).
Image side_by_side(const Image& a, const Image& b);

}  // namespace poar
