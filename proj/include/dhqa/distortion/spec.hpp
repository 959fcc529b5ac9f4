#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "dhqa/common.hpp"

namespace dhqa::distortion {

enum class Family : int {
  SurfaceSimplification = 0,  // SS
  PositionCompression,        // PC
  UvCompression,              // UMC
  TextureDownsampling,        // TD
  TextureCompression,         // TC
  GeometryNoise,              // GN
  ColorNoise,                 // CN
};

inline constexpr std::array<Family, 7> kAllFamilies{
    Family::SurfaceSimplification, Family::PositionCompression, Family::UvCompression,
    Family::TextureDownsampling,   Family::TextureCompression,  Family::GeometryNoise,
    Family::ColorNoise};

inline constexpr int kLevels = 4;

inline constexpr std::string_view code(Family f) {
  constexpr std::array<std::string_view, 7> codes{"SS", "PC", "UMC", "TD", "TC", "GN", "CN"};
  return codes[static_cast<int>(f)];
}

inline Family family_from_code(std::string_view s) {
  for (auto f : kAllFamilies)
    if (code(f) == s) return f;
  throw InvalidArgument("unknown distortion family '" + std::string(s) + "'");
}

/// Parameter per (family, level). TD stores the resolution divisor relative to
/// the reference texture (4096 -> {2048, 1024, 512, 256}).
inline constexpr double parameter(Family f, int level) {
  constexpr double table[7][4] = {
      {0.4, 0.2, 0.1, 0.05},    // SS simplification rate
      {6, 7, 8, 9},             // PC qp bits
      {7, 8, 9, 10},            // UMC qt bits
      {2, 4, 8, 16},            // TD divisor
      {3, 10, 15, 20},          // TC JPEG quality
      {0.05, 0.1, 0.15, 0.2},   // GN sigma_g
      {20, 40, 60, 80},         // CN sigma_c
  };
  return table[static_cast<int>(f)][level];
}

inline constexpr bool is_noise(Family f) {
  return f == Family::GeometryNoise || f == Family::ColorNoise;
}

/// Level 0 is the mildest setting for SS, TD, GN and CN but the harshest for
/// PC, UMC and TC, whose parameters grow as the distortion weakens.
struct DistortionSpec {
  Family family = Family::SurfaceSimplification;
  int level = 0;
  double value = 0.0;
  std::uint64_t seed = 0;

  static DistortionSpec make(Family f, int level, std::uint64_t seed = 0) {
    if (level < 0 || level >= kLevels) throw InvalidArgument("distortion level must be in 0..3");
    return {f, level, parameter(f, level), is_noise(f) ? seed : 0};
  }

  /// e.g. "GN2"
  std::string tag() const { return std::string(code(family)) + std::to_string(level); }

  friend bool operator==(const DistortionSpec&, const DistortionSpec&) = default;
};

}  // namespace dhqa::distortion
