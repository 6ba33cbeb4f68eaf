#include "poar/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "poar/error.hpp"

namespace poar {

Image::Image(int w, int h, double fill) : width(w), height(h) {
  data = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(w) * h * 3, fill);
}

Image image_from_hwc(const Eigen::VectorXd& hwc, int size) {
  if (hwc.size() != static_cast<Eigen::Index>(size) * size * 3) {
    throw UsageError("image_from_hwc: vector length does not match " + std::to_string(size) + "x" +
                     std::to_string(size) + "x3");
  }
  Image img(size, size);
  img.data = hwc;
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image '" + path + "'");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.data.size()));
  for (Eigen::Index i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image '" + path + "'");
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read image '" + path + "'");
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w < 1 || h < 1 || maxval != 255) {
    throw IoError("'" + path + "' is not an 8-bit binary PPM");
  }
  in.get();
  Image img(w, h);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.data.size()));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("'" + path + "' is truncated");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[static_cast<Eigen::Index>(i)] = bytes[i] / 255.0;
  return img;
}

Image side_by_side(const Image& a, const Image& b) {
  if (a.height != b.height) throw UsageError("side_by_side: image heights differ");
  Image out(a.width + b.width, a.height);
  for (int y = 0; y < a.height; ++y) {
    for (int c = 0; c < 3; ++c) {
      for (int x = 0; x < a.width; ++x) out.at(y, x, c) = a.at(y, x, c);
      for (int x = 0; x < b.width; ++x) out.at(y, a.width + x, c) = b.at(y, x, c);
    }
  }
  return out;
}

}  // namespace poar
