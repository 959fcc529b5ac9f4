#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dhqa/common.hpp"

namespace dhqa {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major 8-bit RGB raster. Used both as mesh albedo and as render output.
class TextureImage {
 public:
  TextureImage() = default;

  TextureImage(int width, int height, Rgb fill = {0, 0, 0}) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw InvalidArgument("image dimensions must be >= 1");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill[0];
      pixels_[i + 1] = fill[1];
      pixels_[i + 2] = fill[2];
    }
  }

  /// Adopts an interleaved RGB buffer of exactly width*height*3 bytes.
  static TextureImage from_pixels(int width, int height, std::vector<std::uint8_t> pixels) {
    if (width < 1 || height < 1) throw InvalidArgument("image dimensions must be >= 1");
    if (pixels.size() != static_cast<std::size_t>(width) * height * 3)
      throw InvalidArgument("pixel buffer size does not match width*height*3");
    TextureImage img;
    img.width_ = width;
    img.height_ = height;
    img.pixels_ = std::move(pixels);
    return img;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  std::uint8_t& at(int x, int y, int c) { return pixels_[index(x, y) + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels_[index(x, y) + c]; }

  Rgb pixel(int x, int y) const {
    const auto i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set_pixel(int x, int y, Rgb p) {
    const auto i = index(x, y);
    pixels_[i] = p[0];
    pixels_[i + 1] = p[1];
    pixels_[i + 2] = p[2];
  }

  friend bool operator==(const TextureImage&, const TextureImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// BT.601 full-range luma.
inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

/// Single-channel double plane, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

  double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

inline Plane luma_plane(const TextureImage& img) {
  Plane p(img.width(), img.height());
  const auto d = img.data();
  for (std::size_t i = 0; i < p.v.size(); ++i)
    p.v[i] = luma(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
  return p;
}

/// Bilinear lookup in texel space with clamp-to-edge addressing.
/// UV origin is bottom-left (OBJ convention); texel centers sit at half-integers.
inline std::array<double, 3> sample_bilinear(const TextureImage& tex, double u, double v) {
  const double fx = u * tex.width() - 0.5;
  const double fy = (1.0 - v) * tex.height() - 0.5;
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const double tx = fx - x0f;
  const double ty = fy - y0f;
  auto cx = [&](double x) { return std::clamp(static_cast<int>(x), 0, tex.width() - 1); };
  auto cy = [&](double y) { return std::clamp(static_cast<int>(y), 0, tex.height() - 1); };
  const int x0 = cx(x0f), x1 = cx(x0f + 1.0), y0 = cy(y0f), y1 = cy(y0f + 1.0);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = tex.at(x0, y0, c) * (1.0 - tx) + tex.at(x1, y0, c) * tx;
    const double bot = tex.at(x0, y1, c) * (1.0 - tx) + tex.at(x1, y1, c) * tx;
    out[c] = top * (1.0 - ty) + bot * ty;
  }
  return out;
}

/// Bilinear resize (half-pixel centers, clamp-to-edge). Used for model inputs.
inline TextureImage resize_bilinear(const TextureImage& src, int width, int height) {
  if (width < 1 || height < 1) throw InvalidArgument("resize target must be >= 1");
  TextureImage out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double v = 1.0 - ((y + 0.5) * sy) / src.height();
    for (int x = 0; x < width; ++x) {
      const double u = ((x + 0.5) * sx) / src.width();
      const auto s = sample_bilinear(src, u, v);
      out.set_pixel(x, y, {clamp_to_u8(s[0]), clamp_to_u8(s[1]), clamp_to_u8(s[2])});
    }
  }
  return out;
}

inline TextureImage crop(const TextureImage& src, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || x0 + width > src.width() || y0 + height > src.height())
    throw InvalidArgument("crop window outside image");
  TextureImage out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.set_pixel(x, y, src.pixel(x0 + x, y0 + y));
  return out;
}

}  // namespace dhqa
