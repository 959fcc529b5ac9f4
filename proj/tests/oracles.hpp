#pragma once

// Slow, direct reference implementations used to cross-check the library.
// They share no code with include/dhqa beyond the basic containers.

#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dhqa/image.hpp"

namespace dhqa::oracle {

inline double luma_at(const TextureImage& img, int x, int y) {
  return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
}

inline double psnr(const TextureImage& a, const TextureImage& b) {
  long double sse = 0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const long double d = a.at(x, y, c) - b.at(x, y, c);
        sse += d * d;
        ++n;
      }
  if (sse == 0) return 100.0;
  return std::min(100.0, static_cast<double>(10.0L * std::log10(255.0L * 255.0L * n / sse)));
}

/// Per-window SSIM with an explicit 2D Gaussian, no separable filtering.
inline double ssim(const TextureImage& a, const TextureImage& b) {
  double w2[11][11];
  double total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += w2[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) / 4.5);
  const double C1 = 6.5025, C2 = 58.5225;
  double acc = 0;
  int count = 0;
  for (int y0 = 0; y0 + 11 <= a.height(); ++y0)
    for (int x0 = 0; x0 + 11 <= a.width(); ++x0) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = w2[i][j] / total;
          mx += w * luma_at(a, x0 + j, y0 + i);
          my += w * luma_at(b, x0 + j, y0 + i);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = w2[i][j] / total;
          const double dx = luma_at(a, x0 + j, y0 + i) - mx, dy = luma_at(b, x0 + j, y0 + i) - my;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cxy += w * dx * dy;
        }
      acc += (2 * mx * my + C1) * (2 * cxy + C2) / ((mx * mx + my * my + C1) * (vx + vy + C2));
      ++count;
    }
  return acc / count;
}

/// GMSD with explicit Prewitt kernels and two-pass statistics.
inline double gmsd(const TextureImage& a, const TextureImage& b) {
  const int w = a.width() / 2, h = a.height() / 2;
  auto pooled = [&](const TextureImage& img) {
    std::vector<std::vector<double>> p(h, std::vector<double>(w));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        p[y][x] = (luma_at(img, 2 * x, 2 * y) + luma_at(img, 2 * x + 1, 2 * y) + luma_at(img, 2 * x, 2 * y + 1) +
                   luma_at(img, 2 * x + 1, 2 * y + 1)) / 4;
    return p;
  };
  const int kx[3][3] = {{1, 0, -1}, {1, 0, -1}, {1, 0, -1}};
  auto magnitude = [&](const std::vector<std::vector<double>>& p) {
    std::vector<double> g;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double gx = 0, gy = 0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const double v = p[std::clamp(y + i - 1, 0, h - 1)][std::clamp(x + j - 1, 0, w - 1)];
            gx += kx[i][j] * v / 3;
            gy += kx[j][i] * v / 3;
          }
        g.push_back(std::hypot(gx, gy));
      }
    return g;
  };
  const auto g1 = magnitude(pooled(a)), g2 = magnitude(pooled(b));
  std::vector<double> gms;
  for (std::size_t i = 0; i < g1.size(); ++i)
    gms.push_back((2 * g1[i] * g2[i] + 170) / (g1[i] * g1[i] + g2[i] * g2[i] + 170));
  const double mean = std::accumulate(gms.begin(), gms.end(), 0.0) / gms.size();
  double ss = 0;
  for (double v : gms) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / gms.size());
}

/// Index of the nearest point by exhaustive search; ties go to the lower index.
inline std::size_t nearest(const std::vector<Vec3>& pts, Vec3 q, double* d2_out = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - q;
    const double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
    if (d2 < best) {
      best = d2;
      bi = i;
    }
  }
  if (d2_out) *d2_out = best;
  return bi;
}

/// Normal from the 12 exhaustively found neighbours, via SVD of the centred patch.
inline Vec3 normal_at(const std::vector<Vec3>& pts, std::size_t i) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j = 0; j < pts.size(); ++j)
    if (j != i) {
      const Vec3 v = pts[j] - pts[i];
      d.push_back({v.x * v.x + v.y * v.y + v.z * v.z, j});
    }
  std::partial_sort(d.begin(), d.begin() + 12, d.end());
  Eigen::MatrixXd P(13, 3);
  P.row(0) << pts[i].x, pts[i].y, pts[i].z;
  for (int k = 0; k < 12; ++k) P.row(k + 1) << pts[d[k].second].x, pts[d[k].second].y, pts[d[k].second].z;
  const Eigen::MatrixXd C = P.rowwise() - P.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinV);
  const Eigen::Vector3d n = svd.matrixV().col(2);
  return {n.x(), n.y(), n.z()};
}

inline double p2point(const std::vector<Vec3>& ref, const std::vector<Vec3>& dist) {
  auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0;
    for (const auto& p : from) {
      double d2;
      nearest(to, p, &d2);
      s += d2;
    }
    return s / from.size();
  };
  return std::max(directed(ref, dist), directed(dist, ref));
}

inline double p2plane(const std::vector<Vec3>& ref, const std::vector<Vec3>& dist) {
  auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0;
    for (const auto& p : from) {
      const auto j = nearest(to, p);
      const Vec3 n = normal_at(to, j), e = p - to[j];
      const double proj = e.x * n.x + e.y * n.y + e.z * n.z;
      s += proj * proj;
    }
    return s / from.size();
  };
  return std::max(directed(ref, dist), directed(dist, ref));
}

inline double psnr_yuv(const std::vector<Vec3>& rp, const std::vector<Rgb>& rc, const std::vector<Vec3>& dp,
                       const std::vector<Rgb>& dc) {
  auto yuv = [](const Rgb& c) {
    return std::array<double, 3>{0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2],
                                 128 - 0.168736 * c[0] - 0.331264 * c[1] + 0.5 * c[2],
                                 128 + 0.5 * c[0] - 0.418688 * c[1] - 0.081312 * c[2]};
  };
  auto directed = [&](const std::vector<Vec3>& fp, const std::vector<Rgb>& fc, const std::vector<Vec3>& tp,
                      const std::vector<Rgb>& tc) {
    double m = 0;
    for (std::size_t i = 0; i < fp.size(); ++i) {
      const auto a = yuv(fc[i]), b = yuv(tc[nearest(tp, fp[i])]);
      m += (6 * (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])) / 8;
    }
    return m / fp.size();
  };
  const double mse = std::max(directed(rp, rc, dp, dc), directed(dp, dc, rp, rc));
  return mse == 0 ? 100.0 : std::min(100.0, 10 * std::log10(255.0 * 255.0 / mse));
}

// Correlations, written from the textbook definitions in long double.

inline long double pearson(const std::vector<long double>& x, const std::vector<long double>& y) {
  const long double n = x.size();
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

/// Rank of v[i] = 1 + (#smaller) + (#equal others) / 2.
inline std::vector<long double> tied_ranks(const std::vector<double>& v) {
  std::vector<long double> r;
  for (std::size_t i = 0; i < v.size(); ++i) {
    long double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (j != i && v[j] == v[i]) ++equal;
    }
    r.push_back(1 + less + equal / 2);
  }
  return r;
}

inline double plcc(const std::vector<double>& x, const std::vector<double>& y) {
  return static_cast<double>(pearson({x.begin(), x.end()}, {y.begin(), y.end()}));
}

inline double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  return static_cast<double>(pearson(tied_ranks(x), tied_ranks(y)));
}

/// tau-b = (nc - nd) / sqrt((n0 - n1)(n0 - n2)), with n1 and n2 from the
/// sizes of the tie groups.
inline double krcc(const std::vector<double>& x, const std::vector<double>& y) {
  const long double n = x.size(), n0 = n * (n - 1) / 2;
  auto tie_pairs = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    long double t = 0;
    for (std::size_t i = 0; i < v.size();) {
      std::size_t j = i;
      while (j < v.size() && v[j] == v[i]) ++j;
      const long double g = j - i;
      t += g * (g - 1) / 2;
      i = j;
    }
    return t;
  };
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double a = x[i] - x[j], b = y[i] - y[j];
      s += ((a > 0) - (a < 0)) * ((b > 0) - (b < 0));  // +1 concordant, -1 discordant, 0 tied
    }
  return static_cast<double>(s / std::sqrt((n0 - tie_pairs(x)) * (n0 - tie_pairs(y))));
}

inline double rmse(const std::vector<double>& x, const std::vector<double>& y) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (static_cast<long double>(x[i]) - y[i]) * (static_cast<long double>(x[i]) - y[i]);
  return static_cast<double>(std::sqrt(s / x.size()));
}

}  // namespace dhqa::oracle
