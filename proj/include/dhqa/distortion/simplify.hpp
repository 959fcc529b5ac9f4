#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "dhqa/mesh.hpp"

namespace dhqa::distortion {

namespace detail {

/// Symmetric 4x4 quadric stored as its upper triangle.
struct Quadric {
  // a2 ab ac ad b2 bc bd c2 cd d2
  std::array<double, 10> q{};

  static Quadric plane(double a, double b, double c, double d, double w) {
    Quadric k;
    k.q = {a * a * w, a * b * w, a * c * w, a * d * w, b * b * w,
           b * c * w, b * d * w, c * c * w, c * d * w, d * d * w};
    return k;
  }
  Quadric& operator+=(const Quadric& o) {
    for (int i = 0; i < 10; ++i) q[i] += o.q[i];
    return *this;
  }
  double eval(Vec3 v) const {
    const double x = v.x, y = v.y, z = v.z;
    return q[0] * x * x + 2 * q[1] * x * y + 2 * q[2] * x * z + 2 * q[3] * x + q[4] * y * y +
           2 * q[5] * y * z + 2 * q[6] * y + q[7] * z * z + 2 * q[8] * z + q[9];
  }
  /// Minimizer of the quadric if the 3x3 block is well conditioned.
  bool optimum(Vec3& out) const {
    const double a = q[0], b = q[1], c = q[2], d = q[4], e = q[5], f = q[7];
    const double det = a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d);
    const double scale = std::abs(a) + std::abs(d) + std::abs(f);
    if (scale == 0.0 || std::abs(det) < 1e-12 * scale * scale * scale) return false;
    const double r0 = -q[3], r1 = -q[6], r2 = -q[8];
    out.x = (r0 * (d * f - e * e) - b * (r1 * f - e * r2) + c * (r1 * e - d * r2)) / det;
    out.y = (a * (r1 * f - e * r2) - r0 * (b * f - c * e) + c * (b * r2 - r1 * c)) / det;
    out.z = (a * (d * r2 - r1 * e) - b * (b * r2 - r1 * c) + r0 * (b * e - c * d)) / det;
    return true;
  }
};

struct Candidate {
  double cost;
  std::uint32_t a, b;
  std::uint32_t version_a, version_b;
  Vec3 target;

  bool operator>(const Candidate& o) const {
    if (cost != o.cost) return cost > o.cost;
    if (a != o.a) return a > o.a;
    return b > o.b;
  }
};

}  // namespace detail

/// Quadric-error edge-collapse decimation.
///
/// The result has max(1, round(rate * F)) faces whenever a valid sequence of
/// collapses reaches it; collapses that flip a face, break the link
/// condition, or touch a vertex carrying more than one UV (a seam) are
/// skipped. On a closed mesh an odd face deficit cannot be met by interior
/// collapses, in which case the result stops one face above the target.
inline TexturedMesh simplify_surface(const TexturedMesh& input, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw InvalidArgument("simplification rate must be in (0, 1]");
  if (input.faces.size() < 4) throw InvalidArgument("simplification needs at least 4 faces");
  validate(input);

  const std::size_t target =
      std::max<std::size_t>(1, static_cast<std::size_t>(round_half_up(rate * input.faces.size())));
  TexturedMesh m = input;
  if (target >= m.faces.size()) return m;

  const std::size_t nv = m.positions.size();
  std::vector<bool> face_alive(m.faces.size(), true);
  std::vector<std::vector<std::uint32_t>> incident(nv);
  std::vector<std::set<std::uint32_t>> uv_sets(nv);
  for (std::uint32_t f = 0; f < m.faces.size(); ++f)
    for (const auto& c : m.faces[f]) {
      incident[c.position].push_back(f);
      uv_sets[c.position].insert(c.uv);
    }
  std::vector<bool> seam(nv);
  for (std::size_t v = 0; v < nv; ++v) seam[v] = uv_sets[v].size() > 1;

  std::vector<detail::Quadric> quadric(nv);
  auto add_face_quadric = [&](const Face& f) {
    const Vec3 p0 = m.positions[f[0].position], p1 = m.positions[f[1].position],
               p2 = m.positions[f[2].position];
    const Vec3 n = cross(p1 - p0, p2 - p0);
    const double len = norm(n);
    if (len == 0.0) return;
    const Vec3 u = n * (1.0 / len);
    const auto k = detail::Quadric::plane(u.x, u.y, u.z, -dot(u, p0), 0.5 * len);
    for (const auto& c : f) quadric[c.position] += k;
  };
  for (const auto& f : m.faces) add_face_quadric(f);

  // Boundary edges get a perpendicular constraint plane so open rims keep their shape.
  {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> edge_faces;
    for (std::uint32_t f = 0; f < m.faces.size(); ++f)
      for (int i = 0; i < 3; ++i) {
        auto a = m.faces[f][i].position, b = m.faces[f][(i + 1) % 3].position;
        edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
      }
    for (const auto& [e, fs] : edge_faces) {
      if (fs.size() != 1) continue;
      const Vec3 pa = m.positions[e.first], pb = m.positions[e.second];
      const Vec3 fn = face_normal(m, m.faces[fs[0]]);
      const Vec3 edge = pb - pa;
      const Vec3 n = normalized(cross(edge, fn));
      if (norm(n) == 0.0) continue;
      const double w = 100.0 * dot(edge, edge);
      const auto k = detail::Quadric::plane(n.x, n.y, n.z, -dot(n, pa), w);
      quadric[e.first] += k;
      quadric[e.second] += k;
    }
  }

  std::vector<std::uint32_t> version(nv, 0);
  std::vector<bool> vertex_alive(nv, true);
  std::priority_queue<detail::Candidate, std::vector<detail::Candidate>, std::greater<>> heap;

  auto neighbours = [&](std::uint32_t v) {
    std::set<std::uint32_t> out;
    for (auto f : incident[v])
      if (face_alive[f])
        for (const auto& c : m.faces[f])
          if (c.position != v) out.insert(c.position);
    return out;
  };

  auto push_edge = [&](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    if (seam[a] || seam[b]) return;
    detail::Quadric q = quadric[a];
    q += quadric[b];
    Vec3 best;
    if (!q.optimum(best)) {
      const Vec3 pa = m.positions[a], pb = m.positions[b], mid = (pa + pb) * 0.5;
      best = pa;
      for (const Vec3& c : {pb, mid})
        if (q.eval(c) < q.eval(best)) best = c;
    }
    heap.push({std::max(0.0, q.eval(best)), a, b, version[a], version[b], best});
  };

  for (std::uint32_t v = 0; v < nv; ++v)
    for (auto n : neighbours(v))
      if (v < n) push_edge(v, n);

  std::size_t live_faces = m.faces.size();
  while (live_faces > target && !heap.empty()) {
    const auto cand = heap.top();
    heap.pop();
    const auto a = cand.a, b = cand.b;
    if (!vertex_alive[a] || !vertex_alive[b]) continue;
    if (version[a] != cand.version_a || version[b] != cand.version_b) continue;

    std::vector<std::uint32_t> shared, only;
    std::set<std::uint32_t> opposite;
    for (auto f : incident[a]) {
      if (!face_alive[f]) continue;
      bool has_b = false;
      for (const auto& c : m.faces[f]) has_b |= c.position == b;
      if (has_b) {
        shared.push_back(f);
        for (const auto& c : m.faces[f])
          if (c.position != a && c.position != b) opposite.insert(c.position);
      } else {
        only.push_back(f);
      }
    }
    for (auto f : incident[b]) {
      if (!face_alive[f]) continue;
      bool has_a = false;
      for (const auto& c : m.faces[f]) has_a |= c.position == a;
      if (!has_a) only.push_back(f);
    }
    if (shared.empty()) continue;
    if (live_faces - shared.size() < target) continue;

    // Link condition: common neighbours must be exactly the edge's opposite vertices.
    {
      const auto na = neighbours(a), nb = neighbours(b);
      std::vector<std::uint32_t> common;
      std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
      if (common.size() != opposite.size()) continue;
    }

    bool flips = false;
    for (auto f : only) {
      std::array<Vec3, 3> before, after;
      for (int i = 0; i < 3; ++i) {
        const auto p = m.faces[f][i].position;
        before[i] = m.positions[p];
        after[i] = (p == a || p == b) ? cand.target : before[i];
      }
      const Vec3 n0 = cross(before[1] - before[0], before[2] - before[0]);
      const Vec3 n1 = cross(after[1] - after[0], after[2] - after[0]);
      const double l0 = norm(n0), l1 = norm(n1);
      if (l1 <= 1e-12 * std::max(1.0, l0) || dot(n0, n1) <= 0.0) {
        flips = true;
        break;
      }
    }
    if (flips) continue;

    // Merged UV: interpolate along the edge at the target's projection.
    const Vec3 pa = m.positions[a], pb = m.positions[b];
    const Vec3 ab = pb - pa;
    const double t = std::clamp(dot(cand.target - pa, ab) / std::max(dot(ab, ab), 1e-300), 0.0, 1.0);
    const Vec2 ua = m.uvs[*uv_sets[a].begin()], ub = m.uvs[*uv_sets[b].begin()];
    const auto merged_uv = static_cast<std::uint32_t>(m.uvs.size());
    m.uvs.push_back({ua.x + (ub.x - ua.x) * t, ua.y + (ub.y - ua.y) * t});

    for (auto f : shared) face_alive[f] = false;
    live_faces -= shared.size();
    m.positions[a] = cand.target;
    quadric[a] += quadric[b];
    vertex_alive[b] = false;
    std::vector<std::uint32_t> merged;
    for (auto f : incident[a])
      if (face_alive[f]) merged.push_back(f);
    for (auto f : incident[b])
      if (face_alive[f]) merged.push_back(f);
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    for (auto f : merged)
      for (auto& c : m.faces[f])
        if (c.position == a || c.position == b) {
          c.position = a;
          c.uv = merged_uv;
        }
    incident[a] = std::move(merged);
    incident[b].clear();
    uv_sets[a] = {merged_uv};
    ++version[a];
    for (auto n : neighbours(a)) push_edge(a, n);
  }

  std::vector<Face> kept;
  kept.reserve(live_faces);
  for (std::size_t f = 0; f < m.faces.size(); ++f)
    if (face_alive[f]) kept.push_back(m.faces[f]);
  m.faces = std::move(kept);
  compact(m);
  return m;
}

}  // namespace dhqa::distortion
