#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "dhqa/image.hpp"

namespace dhqa::distortion {

/// Box-filter downsampling: every output texel is the rounded (half up) mean
/// of its divisor x divisor source block.
inline TextureImage downsample_texture(const TextureImage& tex, int divisor) {
  if (divisor < 1) throw InvalidArgument("divisor must be >= 1");
  if (tex.width() % divisor != 0 || tex.height() % divisor != 0)
    throw InvalidArgument("texture dimensions " + std::to_string(tex.width()) + "x" +
                          std::to_string(tex.height()) + " not divisible by " + std::to_string(divisor));
  const int w = tex.width() / divisor, h = tex.height() / divisor;
  const unsigned n = static_cast<unsigned>(divisor * divisor);
  TextureImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        unsigned sum = 0;
        for (int dy = 0; dy < divisor; ++dy)
          for (int dx = 0; dx < divisor; ++dx) sum += tex.at(x * divisor + dx, y * divisor + dy, c);
        out.at(x, y, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
  return out;
}

namespace jpeg {

// ITU-T T.81 Annex K example tables, row-major (not zig-zag).
inline constexpr std::array<int, 64> kLumaTable{
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kChromaTable{
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

/// IJG quality scaling, clamped to baseline range [1, 255].
inline std::array<int, 64> scaled_table(const std::array<int, 64>& base, int quality) {
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

/// Orthonormal 8-point DCT-II basis: basis[u][x].
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x)
        b[u][x] = (u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) *
                  std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    return b;
  }();
  return basis;
}

using Block = std::array<double, 64>;

inline Block forward_dct(const Block& in) {
  const auto& C = dct_basis();
  Block tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += C[u][x] * in[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += C[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  return out;
}

inline Block inverse_dct(const Block& in) {
  const auto& C = dct_basis();
  Block tmp{}, out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += C[u][x] * in[v * 8 + u];
      tmp[v * 8 + x] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += C[v][y] * tmp[v * 8 + x];
      out[y * 8 + x] = s;
    }
  return out;
}

/// Quantize/dequantize one plane blockwise (edge-replicated to 8x8 blocks).
inline Plane code_plane(const Plane& p, const std::array<int, 64>& table) {
  Plane out(p.width, p.height);
  for (int by = 0; by < p.height; by += 8)
    for (int bx = 0; bx < p.width; bx += 8) {
      Block blk{};
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          blk[y * 8 + x] = p(std::min(bx + x, p.width - 1), std::min(by + y, p.height - 1)) - 128.0;
      auto coef = forward_dct(blk);
      for (int i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / table[i]) * table[i];
      const auto rec = inverse_dct(coef);
      for (int y = 0; y < 8 && by + y < p.height; ++y)
        for (int x = 0; x < 8 && bx + x < p.width; ++x) out(bx + x, by + y) = rec[y * 8 + x] + 128.0;
    }
  return out;
}

}  // namespace jpeg

/// JPEG-style lossy round trip without entropy coding: BT.601 full-range
/// YCbCr, 4:2:0 chroma, 8x8 DCT quantized with IJG-scaled Annex K tables.
inline TextureImage compress_texture(const TextureImage& tex, int quality) {
  if (quality < 1 || quality > 100) throw InvalidArgument("JPEG quality must be in [1, 100]");
  const int w = tex.width(), h = tex.height();
  const int cw = (w + 1) / 2, ch = (h + 1) / 2;
  Plane Y(w, h), Cb(w, h), Cr(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = tex.at(x, y, 0), g = tex.at(x, y, 1), b = tex.at(x, y, 2);
      Y(x, y) = 0.299 * r + 0.587 * g + 0.114 * b;
      Cb(x, y) = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
      Cr(x, y) = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    }
  auto subsample = [&](const Plane& full) {
    Plane s(cw, ch);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            sum += full(std::min(2 * x + dx, w - 1), std::min(2 * y + dy, h - 1));
        s(x, y) = sum / 4.0;
      }
    return s;
  };
  const auto luma_q = jpeg::scaled_table(jpeg::kLumaTable, quality);
  const auto chroma_q = jpeg::scaled_table(jpeg::kChromaTable, quality);
  const Plane Yr = jpeg::code_plane(Y, luma_q);
  const Plane Cbr = jpeg::code_plane(subsample(Cb), chroma_q);
  const Plane Crr = jpeg::code_plane(subsample(Cr), chroma_q);

  TextureImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double yy = Yr(x, y), cb = Cbr(x / 2, y / 2) - 128.0, cr = Crr(x / 2, y / 2) - 128.0;
      out.set_pixel(x, y,
                    {clamp_to_u8(yy + 1.402 * cr), clamp_to_u8(yy - 0.344136 * cb - 0.714136 * cr),
                     clamp_to_u8(yy + 1.772 * cb)});
    }
  return out;
}

}  // namespace dhqa::distortion
