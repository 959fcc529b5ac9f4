#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "dhqa/mesh.hpp"

namespace dhqa {

struct SyntheticHeadConfig {
  int rings = 40;          ///< latitude rings below the crown vertex
  int segments = 64;       ///< longitude segments
  int texture_size = 512;  ///< square texture side, divisible by 16
  double neck_cut = 0.8;   ///< polar extent as a fraction of pi (open at the neck)
};

namespace detail {

inline double bump(double dphi, double dtheta, double sphi, double stheta) {
  return std::exp(-0.5 * (dphi * dphi / (sphi * sphi) + dtheta * dtheta / (stheta * stheta)));
}

inline double hash_noise(int x, int y, std::uint64_t seed) {
  const auto h = mix64(seed ^ (static_cast<std::uint64_t>(x) << 32) ^ static_cast<std::uint64_t>(y));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace detail

/// Procedural stand-in for a scanned head: an open ellipsoid with facial
/// relief, a longitude/latitude UV atlas whose seam runs down the back, and a
/// painted albedo with hair, eyes, brows, lips and fine skin detail. Faces
/// look down +z, y is up. Shape and colors vary with `seed`.
inline TexturedMesh make_synthetic_head(std::uint64_t seed, const SyntheticHeadConfig& cfg = {}) {
  using std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);

  const double ax = 0.78 + 0.06 * U(rng), ay = 1.05 + 0.08 * U(rng), az = 0.9 + 0.06 * U(rng);
  const double nose = 0.22 + 0.06 * U(rng), chin = 0.10 + 0.04 * U(rng);
  const double brow = 0.06 + 0.03 * U(rng), ears = 0.10 + 0.03 * U(rng);
  const double theta_max = cfg.neck_cut * pi;

  auto surface = [&](double theta, double phi) {
    const double s = std::sin(theta), c = std::cos(theta);
    Vec3 dir{s * std::sin(phi), c, s * std::cos(phi)};
    double r = 1.0;
    r += nose * detail::bump(phi, theta - 0.56 * pi, 0.12, 0.09);
    r += chin * detail::bump(phi, theta - 0.74 * pi, 0.35, 0.06);
    r += brow * detail::bump(std::abs(phi) - 0.3, theta - 0.44 * pi, 0.25, 0.04);
    r += ears * detail::bump(std::abs(phi) - pi / 2, theta - 0.52 * pi, 0.08, 0.10);
    r -= 0.05 * detail::bump(std::abs(phi) - 0.33, theta - 0.48 * pi, 0.10, 0.05);  // eye sockets
    return Vec3{ax * dir.x * r, ay * dir.y * r, az * dir.z * r};
  };

  TexturedMesh m;
  const int R = cfg.rings, S = cfg.segments;
  m.positions.push_back(surface(0.0, 0.0));
  for (int i = 1; i <= R; ++i) {
    const double theta = theta_max * i / R;
    for (int j = 0; j < S; ++j) m.positions.push_back(surface(theta, -pi + 2.0 * pi * j / S));
  }
  // UV columns 0..S, column S duplicates column 0 across the seam.
  for (int j = 0; j < S; ++j) m.uvs.push_back({(j + 0.5) / S, 1.0});  // crown, one per column
  const auto crown_uv0 = 0u;
  const auto ring_uv0 = static_cast<std::uint32_t>(m.uvs.size());
  for (int i = 1; i <= R; ++i)
    for (int j = 0; j <= S; ++j)
      m.uvs.push_back({static_cast<double>(j) / S, 1.0 - static_cast<double>(i) / R});

  auto pos = [&](int i, int j) { return static_cast<std::uint32_t>(1 + (i - 1) * S + (j % S)); };
  auto uv = [&](int i, int j) { return static_cast<std::uint32_t>(ring_uv0 + (i - 1) * (S + 1) + j); };
  for (int j = 0; j < S; ++j)
    m.faces.push_back({Corner{0, crown_uv0 + j}, Corner{pos(1, j), uv(1, j)}, Corner{pos(1, j + 1), uv(1, j + 1)}});
  for (int i = 1; i < R; ++i)
    for (int j = 0; j < S; ++j) {
      const Corner a{pos(i, j), uv(i, j)}, b{pos(i, j + 1), uv(i, j + 1)};
      const Corner c{pos(i + 1, j), uv(i + 1, j)}, d{pos(i + 1, j + 1), uv(i + 1, j + 1)};
      m.faces.push_back({a, c, d});
      m.faces.push_back({a, d, b});
    }
  // Orient outward.
  const Vec3 centre{0.0, 0.0, 0.0};
  for (auto& f : m.faces) {
    const Vec3 p0 = m.positions[f[0].position], p1 = m.positions[f[1].position], p2 = m.positions[f[2].position];
    const Vec3 n = cross(p1 - p0, p2 - p0);
    if (dot(n, (p0 + p1 + p2) * (1.0 / 3.0) - centre) < 0.0) std::swap(f[1], f[2]);
  }

  // Albedo.
  const int T = cfg.texture_size;
  const std::uint64_t tex_seed = mix64(seed ^ 0x7e47u);
  const double skin_r = 195 + 30 * U(rng), skin_g = 150 + 25 * U(rng), skin_b = 120 + 25 * U(rng);
  const double hair_r = 60 + 40 * U(rng), hair_g = 40 + 25 * U(rng), hair_b = 25 + 15 * U(rng);
  const double hairline = 0.30 + 0.04 * U(rng);
  m.texture = TextureImage(T, T);
  for (int y = 0; y < T; ++y) {
    const double theta = theta_max * (y + 0.5) / T;
    for (int x = 0; x < T; ++x) {
      const double phi = -pi + 2.0 * pi * (x + 0.5) / T;
      const double fine = detail::hash_noise(x, y, tex_seed);
      const double mid = std::sin(phi * 7.0 + 3.0 * std::sin(theta * 5.0)) * std::cos(theta * 9.0);
      double r = skin_r + 14.0 * mid + 9.0 * fine;
      double g = skin_g + 10.0 * mid + 8.0 * fine;
      double b = skin_b + 8.0 * mid + 8.0 * fine;

      const double line = hairline * pi + 0.25 * pi * (std::abs(phi) / pi) * (std::abs(phi) / pi);
      if (theta < line) {
        const double strand = 0.5 + 0.5 * std::sin(phi * 90.0 + 6.0 * std::sin(theta * 17.0));
        r = hair_r + 35.0 * strand + 10.0 * fine;
        g = hair_g + 25.0 * strand + 8.0 * fine;
        b = hair_b + 15.0 * strand + 6.0 * fine;
      }
      for (double side : {-1.0, 1.0}) {
        const double e = detail::bump(phi - side * 0.33, theta - 0.48 * pi, 0.09, 0.03);
        const double iris = detail::bump(phi - side * 0.33, theta - 0.48 * pi, 0.03, 0.02);
        if (e > 0.4) r = 235, g = 232, b = 228;
        if (iris > 0.35) r = 50 + 20 * fine, g = 70 + 15 * fine, b = 90 + 10 * fine;
        const double br = detail::bump(phi - side * 0.33, theta - 0.43 * pi, 0.13, 0.012);
        if (br > 0.45) r = hair_r + 5 * fine, g = hair_g + 5 * fine, b = hair_b + 5 * fine;
      }
      if (detail::bump(phi, theta - 0.66 * pi, 0.16, 0.022) > 0.4) {
        r = 170 + 10 * fine, g = 70 + 8 * fine, b = 75 + 8 * fine;
      }
      m.texture.set_pixel(x, y, {clamp_to_u8(r), clamp_to_u8(g), clamp_to_u8(b)});
    }
  }
  return m;
}

}  // namespace dhqa
