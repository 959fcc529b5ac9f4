#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "dhqa/image.hpp"
#include "dhqa/mesh.hpp"

namespace dhqa::testing {

/// Self-deleting scratch directory.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dhqa_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TextureImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  TextureImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

/// Smooth image with edges and texture; stands in for a natural photo.
inline TextureImage structured_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double fx = 0.05 + 0.1 * U(rng), fy = 0.04 + 0.1 * U(rng), ph = 6.28 * U(rng);
  const int cx = static_cast<int>(w * (0.3 + 0.4 * U(rng))), cy = static_cast<int>(h * (0.3 + 0.4 * U(rng)));
  TextureImage img(w, h);
  std::normal_distribution<double> n(0.0, 6.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double base = 128 + 60 * std::sin(fx * x + ph) * std::cos(fy * y);
      const bool disk = (x - cx) * (x - cx) + (y - cy) * (y - cy) < (w * h) / 20;
      const double r = base + (disk ? 40 : 0) + n(rng);
      const double g = 0.8 * base + (disk ? -30 : 10) + n(rng);
      const double b = 100 + 0.5 * (x * 255.0 / w) + n(rng);
      img.set_pixel(x, y, {clamp_to_u8(r), clamp_to_u8(g), clamp_to_u8(b)});
    }
  return img;
}

/// One triangle with a 4x4 constant texture.
inline TexturedMesh single_triangle(Rgb color = {200, 100, 50}) {
  TexturedMesh m;
  m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.uvs = {{0, 0}, {1, 0}, {0, 1}};
  m.faces = {Face{Corner{0, 0}, Corner{1, 1}, Corner{2, 2}}};
  m.texture = TextureImage(4, 4, color);
  return m;
}

}  // namespace dhqa::testing
