#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dhqa/mesh.hpp"
#include "dhqa/metrics/image_metrics.hpp"
#include "dhqa/metrics/kdtree.hpp"

namespace dhqa::metrics {

struct ColoredPointCloud {
  std::vector<Vec3> points;
  std::vector<Rgb> colors;

  std::size_t size() const { return points.size(); }
};

inline void require_cloud(const ColoredPointCloud& c) {
  if (c.points.empty()) throw InvalidArgument("empty point cloud");
  if (c.points.size() != c.colors.size()) throw InvalidArgument("point/color count mismatch");
}

/// Area-weighted uniform surface sampling; colors are bilinear texture
/// lookups at the interpolated UV.
inline ColoredPointCloud sample_point_cloud(const TexturedMesh& mesh, std::size_t n_points, std::uint64_t seed) {
  if (n_points < 1) throw InvalidArgument("n_points must be >= 1");
  if (mesh.faces.empty()) throw InvalidArgument("cannot sample a mesh without faces");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& F = mesh.faces[f];
    total += triangle_area(mesh.positions[F[0].position], mesh.positions[F[1].position],
                           mesh.positions[F[2].position]);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw InvalidArgument("cannot sample a zero-area mesh");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ColoredPointCloud out;
  out.points.reserve(n_points);
  out.colors.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double r = U(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    if (it == cdf.end()) --it;
    const auto& F = mesh.faces[static_cast<std::size_t>(it - cdf.begin())];
    const double s = std::sqrt(U(rng)), t = U(rng);
    const double w0 = 1.0 - s, w1 = s * (1.0 - t), w2 = s * t;
    const Vec3 p = mesh.positions[F[0].position] * w0 + mesh.positions[F[1].position] * w1 +
                   mesh.positions[F[2].position] * w2;
    const Vec2 a = mesh.uvs[F[0].uv], b = mesh.uvs[F[1].uv], c = mesh.uvs[F[2].uv];
    const auto col = sample_bilinear(mesh.texture, w0 * a.x + w1 * b.x + w2 * c.x, w0 * a.y + w1 * b.y + w2 * c.y);
    out.points.push_back(p);
    out.colors.push_back({clamp_to_u8(col[0]), clamp_to_u8(col[1]), clamp_to_u8(col[2])});
  }
  return out;
}

inline constexpr std::size_t kNormalNeighbours = 12;

/// Unoriented normal of the least-squares plane through a point and its
/// neighbours (smallest-eigenvalue eigenvector of their covariance).
inline Vec3 plane_fit_normal(const std::vector<Vec3>& pts) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d n = es.eigenvectors().col(0);
  return {n.x(), n.y(), n.z()};
}

inline std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, const KdTree& tree) {
  if (points.size() < kNormalNeighbours + 1)
    throw InvalidArgument("normal estimation needs at least 13 points");
  std::vector<Vec3> normals(points.size());
  std::vector<Vec3> patch;
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    patch.assign(1, points[i]);
    for (const auto& nb : tree.knn(points[i], kNormalNeighbours, i)) patch.push_back(points[nb.index]);
    normals[i] = plane_fit_normal(patch);
  }
  return normals;
}

namespace detail {

inline double directed_p2point(const ColoredPointCloud& from, const KdTree& to_tree) {
  double sum = 0.0;
  for (const auto& p : from.points) sum += to_tree.nearest(p).dist2;
  return sum / static_cast<double>(from.size());
}

inline double directed_p2plane(const ColoredPointCloud& from, const ColoredPointCloud& to,
                               const KdTree& to_tree, const std::vector<Vec3>& to_normals) {
  double sum = 0.0;
  for (const auto& p : from.points) {
    const auto nb = to_tree.nearest(p);
    const double e = dot(p - to.points[nb.index], to_normals[nb.index]);
    sum += e * e;
  }
  return sum / static_cast<double>(from.size());
}

inline std::array<double, 3> ycbcr(const Rgb& c) {
  const double r = c[0], g = c[1], b = c[2];
  return {0.299 * r + 0.587 * g + 0.114 * b, -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0,
          0.5 * r - 0.418688 * g - 0.081312 * b + 128.0};
}

/// Weighted (6,1,1)/8 YCbCr MSE over nearest-neighbour pairs.
inline double directed_yuv_mse(const ColoredPointCloud& from, const ColoredPointCloud& to, const KdTree& to_tree) {
  std::array<double, 3> sse{};
  for (std::size_t i = 0; i < from.size(); ++i) {
    const auto nb = to_tree.nearest(from.points[i]);
    const auto a = ycbcr(from.colors[i]), b = ycbcr(to.colors[nb.index]);
    for (int c = 0; c < 3; ++c) sse[c] += (a[c] - b[c]) * (a[c] - b[c]);
  }
  const double n = static_cast<double>(from.size());
  return (6.0 * sse[0] / n + sse[1] / n + sse[2] / n) / 8.0;
}

}  // namespace detail

/// Symmetric point-to-point MSE: max of the two directed means of squared
/// nearest-neighbour distances.
inline double p2point_mse(const ColoredPointCloud& ref, const ColoredPointCloud& dist) {
  require_cloud(ref);
  require_cloud(dist);
  const KdTree rt(ref.points), dt(dist.points);
  return std::max(detail::directed_p2point(dist, rt), detail::directed_p2point(ref, dt));
}

/// Symmetric point-to-plane MSE; each direction projects the displacement
/// onto the 12-NN plane-fit normal of the cloud being matched against.
inline double p2plane_mse(const ColoredPointCloud& ref, const ColoredPointCloud& dist) {
  require_cloud(ref);
  require_cloud(dist);
  const KdTree rt(ref.points), dt(dist.points);
  const auto rn = estimate_normals(ref.points, rt);
  const auto dn = estimate_normals(dist.points, dt);
  return std::max(detail::directed_p2plane(dist, ref, rt, rn), detail::directed_p2plane(ref, dist, dt, dn));
}

/// Color PSNR over nearest-neighbour correspondences in BT.601 YCbCr with
/// (6,1,1)/8 channel weights; symmetric minimum, capped at 100 dB.
inline double psnr_yuv(const ColoredPointCloud& ref, const ColoredPointCloud& dist) {
  require_cloud(ref);
  require_cloud(dist);
  const KdTree rt(ref.points), dt(dist.points);
  const double mse = std::max(detail::directed_yuv_mse(dist, ref, rt), detail::directed_yuv_mse(ref, dist, dt));
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

}  // namespace dhqa::metrics
