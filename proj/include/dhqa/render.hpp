#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dhqa/distortion/spec.hpp"
#include "dhqa/mesh.hpp"

namespace dhqa::render {

enum class View { Front, Left };

inline std::string view_name(View v) { return v == View::Front ? "front" : "left"; }

/// Orthographic camera. Desk default keeps the 1080x1920 portrait aspect.
struct Camera {
  View view = View::Front;
  int width = 270;
  int height = 480;

  void validate() const {
    if (width < 8 || height < 8) throw InvalidArgument("camera dimensions must be >= 8");
  }
};

struct ShadingConfig {
  double ambient = 0.3;
  double diffuse = 0.7;
  Rgb background{255, 255, 255};
};

/// Where the object sits in the image: the bounding sphere (bbox centre,
/// farthest-vertex radius) fills 90% of the shorter image side.
struct Framing {
  Vec3 center;
  double radius = 1.0;
};

inline Framing framing_for(const TexturedMesh& mesh) {
  if (mesh.positions.empty()) throw InvalidArgument("cannot frame an empty mesh");
  const Vec3 c = bounding_box(mesh).center();
  double r = 0.0;
  for (const auto& p : mesh.positions) r = std::max(r, norm(p - c));
  if (r == 0.0) r = 1.0;
  return {c, r};
}

struct ProjectionImage {
  TextureImage image;
  std::string mesh_id;
  std::optional<distortion::DistortionSpec> spec;
  Camera camera;
};

/// Rotation about +y taking world coordinates into the view frame. The
/// camera always looks down -z of the view frame; `Left` is the front view
/// of the object turned by +90 degrees.
inline Vec3 to_view(View v, Vec3 p) {
  if (v == View::Front) return p;
  return {p.z, p.y, -p.x};
}

namespace detail {

constexpr int kSubpixelBits = 8;
constexpr std::int64_t kSubpixel = std::int64_t{1} << kSubpixelBits;

struct ScreenVertex {
  std::int64_t x, y;  // fixed point
  double depth;
  Vec2 uv;
};

inline std::int64_t edge(const ScreenVertex& a, const ScreenVertex& b, std::int64_t px, std::int64_t py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

/// Fill convention for pixels exactly on an edge; opposite traversals of a
/// shared edge disagree, so each such pixel belongs to exactly one triangle.
inline bool owns_edge(const ScreenVertex& a, const ScreenVertex& b) {
  const auto dx = b.x - a.x, dy = b.y - a.y;
  return dy < 0 || (dy == 0 && dx > 0);
}

}  // namespace detail

/// Z-buffered rasterization with affine UV interpolation, bilinear texture
/// sampling and two-sided Lambertian headlight shading on face normals.
/// Faces are drawn in index order; on exactly equal depth the first drawn wins.
inline TextureImage rasterize(const TexturedMesh& mesh, const Camera& camera, const ShadingConfig& shading,
                              const Framing& framing) {
  camera.validate();
  if (mesh.faces.empty()) throw InvalidArgument("cannot render a mesh without faces");
  const int W = camera.width, H = camera.height;
  const double scale = 0.9 * std::min(W, H) / (2.0 * framing.radius);
  const Vec3 c = to_view(camera.view, framing.center);

  TextureImage img(W, H, shading.background);
  std::vector<double> zbuf(static_cast<std::size_t>(W) * H, -std::numeric_limits<double>::infinity());

  for (const auto& f : mesh.faces) {
    std::array<detail::ScreenVertex, 3> v;
    std::array<Vec3, 3> pv;
    for (int i = 0; i < 3; ++i) {
      pv[i] = to_view(camera.view, mesh.positions[f[i].position]);
      const double sx = W * 0.5 + (pv[i].x - c.x) * scale;
      const double sy = H * 0.5 - (pv[i].y - c.y) * scale;
      v[i] = {std::llround(sx * detail::kSubpixel), std::llround(sy * detail::kSubpixel), pv[i].z,
              mesh.uvs[f[i].uv]};
    }
    std::int64_t area = detail::edge(v[0], v[1], v[2].x, v[2].y);
    if (area == 0) continue;
    if (area < 0) {
      std::swap(v[1], v[2]);
      area = -area;
    }
    const Vec3 n = normalized(cross(pv[1] - pv[0], pv[2] - pv[0]));
    const double shade = shading.ambient + shading.diffuse * std::abs(n.z);

    const auto [xmin_f, xmax_f] = std::minmax({v[0].x, v[1].x, v[2].x});
    const auto [ymin_f, ymax_f] = std::minmax({v[0].y, v[1].y, v[2].y});
    const int x0 = std::max<std::int64_t>(0, xmin_f / detail::kSubpixel - 1);
    const int x1 = std::min<std::int64_t>(W - 1, xmax_f / detail::kSubpixel + 1);
    const int y0 = std::max<std::int64_t>(0, ymin_f / detail::kSubpixel - 1);
    const int y1 = std::min<std::int64_t>(H - 1, ymax_f / detail::kSubpixel + 1);
    const bool own0 = detail::owns_edge(v[1], v[2]);
    const bool own1 = detail::owns_edge(v[2], v[0]);
    const bool own2 = detail::owns_edge(v[0], v[1]);
    const double inv_area = 1.0 / static_cast<double>(area);

    for (int py = y0; py <= y1; ++py) {
      const std::int64_t cy = py * detail::kSubpixel + detail::kSubpixel / 2;
      for (int px = x0; px <= x1; ++px) {
        const std::int64_t cx = px * detail::kSubpixel + detail::kSubpixel / 2;
        const auto e0 = detail::edge(v[1], v[2], cx, cy);
        const auto e1 = detail::edge(v[2], v[0], cx, cy);
        const auto e2 = detail::edge(v[0], v[1], cx, cy);
        if (e0 < 0 || e1 < 0 || e2 < 0) continue;
        if ((e0 == 0 && !own0) || (e1 == 0 && !own1) || (e2 == 0 && !own2)) continue;
        const double w0 = e0 * inv_area, w1 = e1 * inv_area, w2 = e2 * inv_area;
        const double depth = w0 * v[0].depth + w1 * v[1].depth + w2 * v[2].depth;
        auto& zb = zbuf[static_cast<std::size_t>(py) * W + px];
        if (!(depth > zb)) continue;
        zb = depth;
        const double u = w0 * v[0].uv.x + w1 * v[1].uv.x + w2 * v[2].uv.x;
        const double t = w0 * v[0].uv.y + w1 * v[1].uv.y + w2 * v[2].uv.y;
        const auto texel = sample_bilinear(mesh.texture, u, t);
        img.set_pixel(px, py, {clamp_to_u8(texel[0] * shade), clamp_to_u8(texel[1] * shade),
                               clamp_to_u8(texel[2] * shade)});
      }
    }
  }
  return img;
}

inline ProjectionImage render(const TexturedMesh& mesh, const Camera& camera, const ShadingConfig& shading = {},
                              std::optional<Framing> framing = std::nullopt) {
  return {rasterize(mesh, camera, shading, framing ? *framing : framing_for(mesh)), {}, std::nullopt, camera};
}

/// Both renders are framed by the reference so geometric change stays visible.
inline std::pair<ProjectionImage, ProjectionImage> render_pair(const TexturedMesh& reference,
                                                               const TexturedMesh& distorted,
                                                               const Camera& camera,
                                                               const ShadingConfig& shading = {}) {
  const auto framing = framing_for(reference);
  return {render(reference, camera, shading, framing), render(distorted, camera, shading, framing)};
}

}  // namespace dhqa::render
