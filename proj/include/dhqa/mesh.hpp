#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dhqa/common.hpp"
#include "dhqa/image.hpp"

namespace dhqa {

/// One triangle corner: a position index and a UV index.
struct Corner {
  std::uint32_t position = 0;
  std::uint32_t uv = 0;

  friend bool operator==(const Corner&, const Corner&) = default;
};

using Face = std::array<Corner, 3>;

/// Triangle mesh with per-corner UVs and one albedo texture.
///
/// Positions and UVs are indexed independently so that UV seams can share
/// geometry. Invariants are checked by validate().
struct TexturedMesh {
  std::vector<Vec3> positions;
  std::vector<Vec2> uvs;
  std::vector<Face> faces;
  TextureImage texture;

  std::size_t face_count() const { return faces.size(); }
};

/// Throws FormatError on the first violated invariant.
inline void validate(const TexturedMesh& m) {
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    for (const auto& c : m.faces[f]) {
      if (c.position >= m.positions.size())
        throw FormatError("face " + std::to_string(f) + " position index out of range");
      if (c.uv >= m.uvs.size())
        throw FormatError("face " + std::to_string(f) + " uv index out of range");
    }
  }
  for (const auto& uv : m.uvs) {
    if (!(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0))
      throw FormatError("uv coordinate outside [0,1]");
  }
  if (m.texture.empty()) throw FormatError("mesh has no texture");
}

inline bool is_valid(const TexturedMesh& m) {
  try {
    validate(m);
    return true;
  } catch (const FormatError&) {
    return false;
  }
}

struct BoundingBox {
  Vec3 min;
  Vec3 max;
  double diagonal = 0.0;

  Vec3 center() const { return (min + max) * 0.5; }
  Vec3 extent() const { return max - min; }
};

inline BoundingBox bounding_box(const std::vector<Vec3>& positions) {
  if (positions.empty()) throw InvalidArgument("bounding box of empty position list");
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox b{{inf, inf, inf}, {-inf, -inf, -inf}, 0.0};
  for (const auto& p : positions) {
    for (int a = 0; a < 3; ++a) {
      b.min[a] = std::min(b.min[a], p[a]);
      b.max[a] = std::max(b.max[a], p[a]);
    }
  }
  b.diagonal = norm(b.max - b.min);
  return b;
}

inline BoundingBox bounding_box(const TexturedMesh& m) { return bounding_box(m.positions); }

inline double triangle_area(Vec3 a, Vec3 b, Vec3 c) { return 0.5 * norm(cross(b - a, c - a)); }

inline Vec3 face_normal(const TexturedMesh& m, const Face& f) {
  const Vec3 a = m.positions[f[0].position];
  const Vec3 b = m.positions[f[1].position];
  const Vec3 c = m.positions[f[2].position];
  return normalized(cross(b - a, c - a));
}

/// Drops positions and UVs that no face references, preserving relative order.
inline void compact(TexturedMesh& m) {
  constexpr auto unused = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> pmap(m.positions.size(), unused), tmap(m.uvs.size(), unused);
  for (const auto& f : m.faces)
    for (const auto& c : f) {
      pmap[c.position] = 0;
      tmap[c.uv] = 0;
    }
  std::vector<Vec3> pos;
  std::vector<Vec2> uvs;
  for (std::size_t i = 0; i < pmap.size(); ++i)
    if (pmap[i] != unused) {
      pmap[i] = static_cast<std::uint32_t>(pos.size());
      pos.push_back(m.positions[i]);
    }
  for (std::size_t i = 0; i < tmap.size(); ++i)
    if (tmap[i] != unused) {
      tmap[i] = static_cast<std::uint32_t>(uvs.size());
      uvs.push_back(m.uvs[i]);
    }
  for (auto& f : m.faces)
    for (auto& c : f) {
      c.position = pmap[c.position];
      c.uv = tmap[c.uv];
    }
  m.positions = std::move(pos);
  m.uvs = std::move(uvs);
}

}  // namespace dhqa
