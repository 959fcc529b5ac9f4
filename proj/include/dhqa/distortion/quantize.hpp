#pragma once

#include <cmath>
#include <cstdint>

#include "dhqa/mesh.hpp"

namespace dhqa::distortion {

namespace detail {

/// Uniform grid of 2^bits - 1 steps over [lo, hi], round half up. The top
/// grid point maps to `hi` exactly so re-quantizing is a fixed point.
inline double snap(double v, double lo, double hi, std::uint64_t steps) {
  if (hi <= lo) return v;
  const double q = round_half_up((v - lo) / (hi - lo) * static_cast<double>(steps));
  if (q <= 0.0) return lo;
  if (q >= static_cast<double>(steps)) return hi;
  return lo + q / static_cast<double>(steps) * (hi - lo);
}

inline std::uint64_t grid_steps(int bits) {
  if (bits < 1 || bits > 30) throw InvalidArgument("quantization bits must be in [1, 30]");
  return (std::uint64_t{1} << bits) - 1;
}

}  // namespace detail

/// Draco-style position quantization over the per-axis bounding box.
inline TexturedMesh quantize_positions(const TexturedMesh& mesh, int qp_bits) {
  const auto steps = detail::grid_steps(qp_bits);
  if (mesh.positions.empty()) throw InvalidArgument("cannot quantize an empty mesh");
  const auto box = bounding_box(mesh);
  TexturedMesh out = mesh;
  for (auto& p : out.positions)
    for (int a = 0; a < 3; ++a) p[a] = detail::snap(p[a], box.min[a], box.max[a], steps);
  return out;
}

/// Texture-coordinate quantization over the fixed range [0,1].
inline TexturedMesh quantize_uvs(const TexturedMesh& mesh, int qt_bits) {
  const auto steps = detail::grid_steps(qt_bits);
  TexturedMesh out = mesh;
  for (auto& t : out.uvs) {
    t.x = detail::snap(t.x, 0.0, 1.0, steps);
    t.y = detail::snap(t.y, 0.0, 1.0, steps);
  }
  return out;
}

}  // namespace dhqa::distortion
