#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dhqa/image_io.hpp"
#include "dhqa/mesh.hpp"

namespace dhqa {

using Warnings = std::vector<std::string>;

namespace detail {

inline double parse_double(const std::string& tok, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
}

inline long parse_index(const std::string& tok, int line_no) {
  long v = 0;
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || v == 0)
    throw FormatError("line " + std::to_string(line_no) + ": bad index '" + tok + "'");
  return v;
}

/// Resolves a 1-based (or negative, relative) OBJ index against the current count.
inline std::uint32_t resolve_index(long idx, std::size_t count, int line_no, const char* what) {
  const long resolved = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
  if (resolved < 0 || static_cast<std::size_t>(resolved) >= count)
    throw FormatError("line " + std::to_string(line_no) + ": " + what + " index " +
                      std::to_string(idx) + " out of range");
  return static_cast<std::uint32_t>(resolved);
}

inline std::filesystem::path texture_from_mtl(const std::filesystem::path& mtl) {
  std::ifstream in(mtl);
  if (!in) return {};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "map_Kd") {
      std::string rest;
      std::getline(ss, rest);
      return mtl.parent_path() / trim(rest);
    }
  }
  return {};
}

}  // namespace detail

/// Loads the OBJ subset `v`, `vt`, `f v/vt ...` plus the texture named by the
/// first `map_Kd` of the referenced material library, falling back to a
/// sibling `<stem>.ppm` / `<stem>.png`. Polygons are fan-triangulated and UVs
/// clamped to [0,1]. Unsupported statements are reported through `warnings`.
inline TexturedMesh load_mesh(const std::filesystem::path& path, Warnings* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh: " + path.string());

  TexturedMesh mesh;
  std::filesystem::path texture_path;
  std::set<std::string> warned;
  auto warn = [&](const std::string& key) {
    if (warnings && warned.insert(key).second)
      warnings->push_back("ignored OBJ statement '" + key + "' in " + path.string());
  };

  std::string line;
  int line_no = 0;
  std::vector<Corner> poly;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "v") {
      std::string a, b, c;
      if (!(ss >> a >> b >> c)) throw FormatError("line " + std::to_string(line_no) + ": short vertex");
      mesh.positions.push_back({detail::parse_double(a, line_no), detail::parse_double(b, line_no),
                                detail::parse_double(c, line_no)});
    } else if (key == "vt") {
      std::string a, b;
      if (!(ss >> a >> b)) throw FormatError("line " + std::to_string(line_no) + ": short texcoord");
      const double u = std::clamp(detail::parse_double(a, line_no), 0.0, 1.0);
      const double v = std::clamp(detail::parse_double(b, line_no), 0.0, 1.0);
      mesh.uvs.push_back({u, v});
    } else if (key == "f") {
      poly.clear();
      std::string tok;
      while (ss >> tok) {
        const auto parts = split(tok, '/');
        if (parts.size() < 2 || parts[1].empty())
          throw FormatError("line " + std::to_string(line_no) + ": face corner without uv index");
        Corner c;
        c.position = detail::resolve_index(detail::parse_index(parts[0], line_no),
                                           mesh.positions.size(), line_no, "position");
        c.uv = detail::resolve_index(detail::parse_index(parts[1], line_no), mesh.uvs.size(),
                                     line_no, "uv");
        poly.push_back(c);
      }
      if (poly.size() < 3) throw FormatError("line " + std::to_string(line_no) + ": face with < 3 corners");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
    } else if (key == "mtllib") {
      std::string rest;
      std::getline(ss, rest);
      if (texture_path.empty()) texture_path = detail::texture_from_mtl(path.parent_path() / trim(rest));
    } else {
      warn(key);
    }
  }

  if (texture_path.empty()) {
    for (const char* ext : {".ppm", ".png"}) {
      auto candidate = path;
      candidate.replace_extension(ext);
      if (std::filesystem::exists(candidate)) {
        texture_path = candidate;
        break;
      }
    }
  }
  if (texture_path.empty()) throw IoError("no texture found for mesh: " + path.string());
  if (!std::filesystem::exists(texture_path))
    throw IoError("missing texture file " + texture_path.string() + " for mesh " + path.string());
  mesh.texture = read_image(texture_path);
  validate(mesh);
  return mesh;
}

/// Writes `<path>` (OBJ), `<stem>.mtl` and `<stem><texture_ext>` next to it.
/// Coordinates are printed with 6 decimal digits.
inline void save_mesh(const TexturedMesh& mesh, const std::filesystem::path& path,
                      const std::string& texture_ext = ".ppm") {
  validate(mesh);
  const auto stem = path.stem().string();
  const auto dir = path.parent_path();
  const auto mtl_name = stem + ".mtl";
  const auto tex_name = stem + texture_ext;

  std::ofstream obj(path);
  if (!obj) throw IoError("cannot write mesh: " + path.string());
  char buf[128];
  obj << "mtllib " << mtl_name << "\nusemtl material0\n";
  for (const auto& p : mesh.positions) {
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", p.x, p.y, p.z);
    obj << buf;
  }
  for (const auto& t : mesh.uvs) {
    std::snprintf(buf, sizeof buf, "vt %.6f %.6f\n", t.x, t.y);
    obj << buf;
  }
  for (const auto& f : mesh.faces) {
    obj << 'f';
    for (const auto& c : f) obj << ' ' << (c.position + 1) << '/' << (c.uv + 1);
    obj << '\n';
  }
  if (!obj) throw IoError("write failed: " + path.string());

  std::ofstream mtl(dir / mtl_name);
  if (!mtl) throw IoError("cannot write material: " + (dir / mtl_name).string());
  mtl << "newmtl material0\nKd 1 1 1\nmap_Kd " << tex_name << '\n';
  write_image(mesh.texture, dir / tex_name);
}

}  // namespace dhqa
