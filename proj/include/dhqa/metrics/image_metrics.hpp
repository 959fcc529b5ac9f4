#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "dhqa/image.hpp"

namespace dhqa::metrics {

inline constexpr double kPsnrCap = 100.0;

inline void require_same_size(const TextureImage& a, const TextureImage& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InvalidArgument("image dimensions differ: " + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()));
}

/// PSNR over all channels; identical inputs return the 100 dB cap.
inline double psnr(const TextureImage& ref, const TextureImage& dist) {
  require_same_size(ref, dist);
  const auto a = ref.data(), b = dist.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(a.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace detail {

inline std::array<double, 11> gaussian_window() {
  std::array<double, 11> w{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double x = i - 5;
    w[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

/// Separable "valid" filtering with the 11-tap Gaussian.
inline Plane filter_valid(const Plane& p) {
  static const auto w = gaussian_window();
  const int ow = p.width - 10, oh = p.height - 10;
  Plane rows(ow, p.height), out(ow, oh);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < 11; ++k) s += w[k] * p(x + k, y);
      rows(x, y) = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < 11; ++k) s += w[k] * rows(x, y + k);
      out(x, y) = s;
    }
  return out;
}

struct SsimStats {
  double ssim;  ///< mean of the full SSIM map
  double cs;    ///< mean of the contrast-structure map
};

inline SsimStats ssim_stats(const Plane& x, const Plane& y) {
  if (x.width < 11 || x.height < 11) throw InvalidArgument("SSIM needs at least 11x11 pixels");
  constexpr double C1 = (0.01 * 255) * (0.01 * 255);
  constexpr double C2 = (0.03 * 255) * (0.03 * 255);
  Plane xx(x.width, x.height), yy(x.width, x.height), xy(x.width, x.height);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    xx.v[i] = x.v[i] * x.v[i];
    yy.v[i] = y.v[i] * y.v[i];
    xy.v[i] = x.v[i] * y.v[i];
  }
  const Plane mx = filter_valid(x), my = filter_valid(y);
  const Plane sxx = filter_valid(xx), syy = filter_valid(yy), sxy = filter_valid(xy);
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    const double mux = mx.v[i], muy = my.v[i];
    const double vx = sxx.v[i] - mux * mux, vy = syy.v[i] - muy * muy, cxy = sxy.v[i] - mux * muy;
    const double cs = (2.0 * cxy + C2) / (vx + vy + C2);
    const double l = (2.0 * mux * muy + C1) / (mux * mux + muy * muy + C1);
    ssim_sum += l * cs;
    cs_sum += cs;
  }
  const double n = static_cast<double>(mx.v.size());
  return {ssim_sum / n, cs_sum / n};
}

/// 2x2 mean then decimate by two (floor of odd sizes).
inline Plane halve(const Plane& p) {
  Plane out(p.width / 2, p.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out(x, y) = 0.25 * (p(2 * x, 2 * y) + p(2 * x + 1, 2 * y) + p(2 * x, 2 * y + 1) + p(2 * x + 1, 2 * y + 1));
  return out;
}

}  // namespace detail

/// Luma SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// averaged over all valid window positions.
inline double ssim(const TextureImage& ref, const TextureImage& dist) {
  require_same_size(ref, dist);
  return detail::ssim_stats(luma_plane(ref), luma_plane(dist)).ssim;
}

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Five-scale MS-SSIM. The published weights sum to 1.0001 and are
/// renormalized; negative contrast-structure means are clamped to zero so the
/// fractional powers stay real.
inline double ms_ssim(const TextureImage& ref, const TextureImage& dist) {
  require_same_size(ref, dist);
  if (ref.width() < 176 || ref.height() < 176)
    throw InvalidArgument("MS-SSIM needs at least 176x176 pixels for 5 scales");
  const double wsum = std::accumulate(kMsSsimWeights.begin(), kMsSsimWeights.end(), 0.0);
  Plane x = luma_plane(ref), y = luma_plane(dist);
  double score = 1.0;
  for (int s = 0; s < 5; ++s) {
    const auto st = detail::ssim_stats(x, y);
    const double w = kMsSsimWeights[s] / wsum;
    const double term = s < 4 ? st.cs : st.ssim;
    score *= std::pow(std::max(term, 0.0), w);
    if (s < 4) {
      x = detail::halve(x);
      y = detail::halve(y);
    }
  }
  return score;
}

namespace detail {

inline Plane prewitt_magnitude(const Plane& p) {
  Plane g(p.width, p.height);
  auto at = [&](int x, int y) {
    return p(std::clamp(x, 0, p.width - 1), std::clamp(y, 0, p.height - 1));
  };
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int k = -1; k <= 1; ++k) {
        gx += at(x - 1, y + k) - at(x + 1, y + k);
        gy += at(x + k, y - 1) - at(x + k, y + 1);
      }
      gx /= 3.0;
      gy /= 3.0;
      g(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  return g;
}

}  // namespace detail

/// Gradient magnitude similarity deviation on luma: 2x2 mean-pool, 3x3
/// Prewitt (replicated borders), c = 170, population standard deviation of
/// the similarity map. Zero for identical inputs; larger is worse.
inline double gmsd(const TextureImage& ref, const TextureImage& dist) {
  require_same_size(ref, dist);
  if (ref.width() < 2 || ref.height() < 2) throw InvalidArgument("GMSD needs at least 2x2 pixels");
  constexpr double c = 170.0;
  const Plane g1 = detail::prewitt_magnitude(detail::halve(luma_plane(ref)));
  const Plane g2 = detail::prewitt_magnitude(detail::halve(luma_plane(dist)));
  const std::size_t n = g1.v.size();
  std::vector<double> map(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    map[i] = (2.0 * g1.v[i] * g2.v[i] + c) / (g1.v[i] * g1.v[i] + g2.v[i] * g2.v[i] + c);
    mean += map[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double m : map) var += (m - mean) * (m - mean);
  return std::sqrt(var / static_cast<double>(n));
}

}  // namespace dhqa::metrics
