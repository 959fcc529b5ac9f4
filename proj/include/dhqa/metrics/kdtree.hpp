#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "dhqa/common.hpp"

namespace dhqa::metrics {

struct Neighbour {
  double dist2 = std::numeric_limits<double>::infinity();
  std::uint32_t index = std::numeric_limits<std::uint32_t>::max();

  /// Distance first, then lowest index: matches a brute-force scan exactly.
  friend bool operator<(const Neighbour& a, const Neighbour& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

/// Static 3-d tree over a borrowed point array.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points) : pts_(&points), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), 0u);
    if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()));
  }

  Neighbour nearest(const Vec3& q) const {
    Neighbour best;
    if (!nodes_.empty()) search_nearest(0, q, best);
    return best;
  }

  /// k nearest points, ascending; `exclude` (if set) is skipped.
  std::vector<Neighbour> knn(const Vec3& q, std::size_t k,
                             std::uint32_t exclude = std::numeric_limits<std::uint32_t>::max()) const {
    std::priority_queue<Neighbour> heap;  // max-heap on (dist2, index)
    if (!nodes_.empty() && k > 0) search_knn(0, q, k, exclude, heap);
    std::vector<Neighbour> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kLeaf = 8;
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Node {
    std::uint32_t lo, hi;
    int axis;
    double split;
    std::uint32_t left = kNone, right = kNone;
  };

  std::uint32_t build(std::uint32_t lo, std::uint32_t hi) {
    const auto& P = *pts_;
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({lo, hi, -1, 0.0});
    if (hi - lo <= kLeaf) return id;
    Vec3 mn{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 mx = mn * -1.0;
    for (auto i = lo; i < hi; ++i)
      for (int a = 0; a < 3; ++a) {
        mn[a] = std::min(mn[a], P[order_[i]][a]);
        mx[a] = std::max(mx[a], P[order_[i]][a]);
      }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;
    const auto mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) { return P[a][axis] < P[b][axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = P[order_[mid]][axis];
    const auto l = build(lo, mid);
    const auto r = build(mid, hi);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  double dist2(const Vec3& q, std::uint32_t i) const {
    const Vec3 d = (*pts_)[i] - q;
    return dot(d, d);
  }

  void search_nearest(std::uint32_t n, const Vec3& q, Neighbour& best) const {
    const Node& node = nodes_[n];
    if (node.axis < 0) {
      for (auto i = node.lo; i < node.hi; ++i) {
        const Neighbour c{dist2(q, order_[i]), order_[i]};
        if (c < best) best = c;
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const auto near = diff < 0.0 ? node.left : node.right;
    const auto far = diff < 0.0 ? node.right : node.left;
    search_nearest(near, q, best);
    if (diff * diff <= best.dist2) search_nearest(far, q, best);
  }

  void search_knn(std::uint32_t n, const Vec3& q, std::size_t k, std::uint32_t exclude,
                  std::priority_queue<Neighbour>& heap) const {
    const Node& node = nodes_[n];
    if (node.axis < 0) {
      for (auto i = node.lo; i < node.hi; ++i) {
        if (order_[i] == exclude) continue;
        const Neighbour c{dist2(q, order_[i]), order_[i]};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const auto near = diff < 0.0 ? node.left : node.right;
    const auto far = diff < 0.0 ? node.right : node.left;
    search_knn(near, q, k, exclude, heap);
    if (heap.size() < k || diff * diff <= heap.top().dist2) search_knn(far, q, k, exclude, heap);
  }

  const std::vector<Vec3>* pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace dhqa::metrics
