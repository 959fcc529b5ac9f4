#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dhqa/common.hpp"
#include "dhqa/distortion/spec.hpp"

namespace dhqa::pipeline {

inline constexpr int kManifestSchema = 1;
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kDataRootEnv = "DHQA_DATA_ROOT";

/// Relative paths are taken against $DHQA_DATA_ROOT when it is set.
inline std::filesystem::path resolve(const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) return std::filesystem::path(root) / p;
  return p;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// One file written by a stage. Paths are relative to the manifest's directory.
struct Artifact {
  std::string path;
  std::string kind;  ///< "mesh", "image", "csv", "model", ...
  std::string stimulus_id;
  std::string reference_id;
  std::string role;  ///< "reference" / "distorted" for meshes and images
  std::string view;  ///< images only
  std::string spec;  ///< distortion tag, distorted items only

  friend bool operator==(const Artifact&, const Artifact&) = default;
};

struct RunManifest {
  int schema_version = kManifestSchema;
  std::string stage;
  std::string tool_version = kToolVersion;
  std::string created;  ///< excluded from equality
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> inputs;
  std::vector<Artifact> outputs;
  std::vector<std::string> errors;

  /// Equality up to the creation timestamp.
  bool same_content(const RunManifest& o) const {
    return schema_version == o.schema_version && stage == o.stage && tool_version == o.tool_version &&
           config == o.config && inputs == o.inputs && outputs == o.outputs && errors == o.errors;
  }
};

inline nlohmann::json to_json(const Artifact& a) {
  nlohmann::json j{{"path", a.path}, {"kind", a.kind}};
  for (const auto& [key, value] : {std::pair{"stimulus_id", &a.stimulus_id}, std::pair{"reference_id", &a.reference_id},
                                   std::pair{"role", &a.role}, std::pair{"view", &a.view}, std::pair{"spec", &a.spec}})
    if (!value->empty()) j[key] = *value;
  return j;
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& a : m.outputs) outs.push_back(to_json(a));
  return {{"schema_version", m.schema_version}, {"stage", m.stage},   {"tool_version", m.tool_version},
          {"created", m.created},               {"config", m.config}, {"inputs", m.inputs},
          {"outputs", outs},                    {"errors", m.errors}};
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(m).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.schema_version = j.at("schema_version");
    if (m.schema_version != kManifestSchema)
      throw FormatError("manifest " + path.string() + " has schema_version " + std::to_string(m.schema_version) +
                        ", expected " + std::to_string(kManifestSchema));
    m.stage = j.at("stage");
    m.tool_version = j.at("tool_version");
    m.created = j.value("created", "");
    m.config = j.value("config", nlohmann::json::object());
    m.inputs = j.value("inputs", std::vector<std::string>{});
    m.errors = j.value("errors", std::vector<std::string>{});
    for (const auto& o : j.at("outputs")) {
      Artifact a;
      a.path = o.at("path");
      a.kind = o.at("kind");
      a.stimulus_id = o.value("stimulus_id", "");
      a.reference_id = o.value("reference_id", "");
      a.role = o.value("role", "");
      a.view = o.value("view", "");
      a.spec = o.value("spec", "");
      m.outputs.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

/// Requires `m` to come from `stage`.
inline void expect_stage(const RunManifest& m, const std::string& stage, const std::filesystem::path& path) {
  if (m.stage != stage)
    throw FormatError("manifest " + path.string() + " is from stage '" + m.stage + "', expected '" + stage + "'");
}

}  // namespace dhqa::pipeline
