#pragma once

#include <span>
#include <string>
#include <vector>

#include "dhqa/distortion/noise.hpp"
#include "dhqa/distortion/quantize.hpp"
#include "dhqa/distortion/simplify.hpp"
#include "dhqa/distortion/spec.hpp"
#include "dhqa/distortion/texture.hpp"

namespace dhqa::distortion {

struct DistortionOptions {
  double sigma_scale = 0.01;  ///< GN: fraction of the bbox diagonal per unit sigma_g
};

inline TexturedMesh apply(const TexturedMesh& mesh, const DistortionSpec& spec,
                          const DistortionOptions& opt = {}) {
  switch (spec.family) {
    case Family::SurfaceSimplification:
      return simplify_surface(mesh, spec.value);
    case Family::PositionCompression:
      return quantize_positions(mesh, static_cast<int>(spec.value));
    case Family::UvCompression:
      return quantize_uvs(mesh, static_cast<int>(spec.value));
    case Family::TextureDownsampling: {
      TexturedMesh out = mesh;
      out.texture = downsample_texture(mesh.texture, static_cast<int>(spec.value));
      return out;
    }
    case Family::TextureCompression: {
      TexturedMesh out = mesh;
      out.texture = compress_texture(mesh.texture, static_cast<int>(spec.value));
      return out;
    }
    case Family::GeometryNoise:
      return add_geometry_noise(mesh, spec.value, spec.seed, opt.sigma_scale);
    case Family::ColorNoise: {
      TexturedMesh out = mesh;
      out.texture = add_color_noise(mesh.texture, spec.value, spec.seed);
      return out;
    }
  }
  throw InvalidArgument("unknown distortion family");
}

struct NamedMesh {
  std::string id;
  TexturedMesh mesh;
};

struct GridItem {
  std::string reference_id;
  std::string stimulus_id;  ///< "<reference>__<FAMILY><level>"
  DistortionSpec spec;
  TexturedMesh mesh;
};

inline std::string stimulus_id(const std::string& reference_id, const DistortionSpec& spec) {
  return reference_id + "__" + spec.tag();
}

/// Content id encoded in a stimulus id (everything before the first "__").
inline std::string content_of(const std::string& stimulus) {
  const auto pos = stimulus.find("__");
  return pos == std::string::npos ? stimulus : stimulus.substr(0, pos);
}

/// Per-item noise seed; independent of processing order.
inline std::uint64_t item_seed(std::uint64_t master, const std::string& reference_id, Family f, int level) {
  return derive_seed(master, hash_string(reference_id), static_cast<std::uint64_t>(f),
                     static_cast<std::uint64_t>(level));
}

/// The specs of the full grid for one reference, family-major.
inline std::vector<DistortionSpec> grid_specs(std::uint64_t master, const std::string& reference_id) {
  std::vector<DistortionSpec> specs;
  for (auto f : kAllFamilies)
    for (int l = 0; l < kLevels; ++l) specs.push_back(DistortionSpec::make(f, l, item_seed(master, reference_id, f, l)));
  return specs;
}

/// references x 7 families x 4 levels.
inline std::vector<GridItem> generate_grid(std::span<const NamedMesh> references, std::uint64_t seed,
                                           const DistortionOptions& opt = {}) {
  if (references.empty()) throw InvalidArgument("generate_grid needs at least one reference");
  std::vector<GridItem> out;
  out.reserve(references.size() * kAllFamilies.size() * kLevels);
  for (const auto& ref : references)
    for (const auto& spec : grid_specs(seed, ref.id))
      out.push_back({ref.id, stimulus_id(ref.id, spec), spec, apply(ref.mesh, spec, opt)});
  return out;
}

}  // namespace dhqa::distortion
