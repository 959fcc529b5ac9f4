#pragma once

#include <cstdint>
#include <random>

#include "dhqa/mesh.hpp"

namespace dhqa::distortion {

/// sigma_g is read as a percentage of the bounding-box diagonal by default
/// (sigma_scale = 0.01); the effective per-coordinate std is
/// sigma_g * sigma_scale * diagonal.
inline TexturedMesh add_geometry_noise(const TexturedMesh& mesh, double sigma_g, std::uint64_t seed,
                                       double sigma_scale = 0.01) {
  if (!(sigma_g >= 0.0)) throw InvalidArgument("sigma_g must be >= 0");
  const auto box = bounding_box(mesh);
  if (box.diagonal == 0.0) throw InvalidArgument("geometry noise needs a non-degenerate bounding box");
  TexturedMesh out = mesh;
  if (sigma_g == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma_g * sigma_scale * box.diagonal);
  for (auto& p : out.positions) {
    p.x += n(rng);
    p.y += n(rng);
    p.z += n(rng);
  }
  return out;
}

/// i.i.d. Gaussian noise in 8-bit units on every channel of every texel.
inline TextureImage add_color_noise(const TextureImage& tex, double sigma_c, std::uint64_t seed) {
  if (!(sigma_c >= 0.0)) throw InvalidArgument("sigma_c must be >= 0");
  TextureImage out = tex;
  if (sigma_c == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma_c);
  for (auto& v : out.data()) v = clamp_to_u8(v + n(rng));
  return out;
}

}  // namespace dhqa::distortion
