#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>

#include "json.hpp"

#include "dhqa/model/model.hpp"

// Container layout: 8-byte magic "DHQAMDL1", u32 little-endian header
// length, UTF-8 JSON header (configs and the ordered tensor table), then
// each tensor's values as little-endian IEEE-754 doubles in table order.

namespace dhqa::model {

inline constexpr char kModelMagic[8] = {'D', 'H', 'Q', 'A', 'M', 'D', 'L', '1'};

static_assert(std::endian::native == std::endian::little, "model files are written on little-endian hosts only");

inline nlohmann::json to_json(const EncoderConfig& e) {
  return {{"channels", e.channels}, {"depths", e.depths},       {"heads", e.heads},         {"window", e.window},
          {"patch", e.patch},       {"image_side", e.image_side}, {"mlp_ratio", e.mlp_ratio}};
}

inline nlohmann::json to_json(const FusionConfig& f) {
  return {{"width", f.width},
          {"heads", f.heads},
          {"tokens", f.tokens == TokenMode::Stages ? "stages" : "single"},
          {"attention", f.attention},
          {"hidden", f.hidden}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig e;
  e.channels = j.at("channels");
  e.depths = j.at("depths").get<std::array<int, kStages>>();
  e.heads = j.at("heads");
  e.window = j.at("window");
  e.patch = j.at("patch");
  e.image_side = j.at("image_side");
  e.mlp_ratio = j.at("mlp_ratio");
  return e;
}

inline FusionConfig fusion_config_from_json(const nlohmann::json& j) {
  FusionConfig f;
  f.width = j.at("width");
  f.heads = j.at("heads");
  const std::string tokens = j.at("tokens");
  if (tokens != "stages" && tokens != "single") throw FormatError("model file: unknown token mode " + tokens);
  f.tokens = tokens == "stages" ? TokenMode::Stages : TokenMode::Single;
  f.attention = j.at("attention");
  f.hidden = j.at("hidden");
  return f;
}

inline void save_model(const Model& m, std::ostream& out) {
  nlohmann::json header;
  header["encoder"] = to_json(m.encoder_config());
  header["fusion"] = to_json(m.fusion_config());
  header["output_scale"] = m.output_scale();
  auto& table = header["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const auto& p = m.params()[i];
    table.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  const std::string text = header.dump();
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(kModelMagic, sizeof kModelMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const auto& v = m.params()[i].value;
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed to write model");
}

inline void save_model(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_model(m, out);
}

inline std::unique_ptr<Model> load_model(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
    throw FormatError("not a model file (bad magic)");
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 26)) throw FormatError("model file: bad header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw FormatError("model file: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad header: ") + e.what());
  }
  std::unique_ptr<Model> m;
  try {
    m = std::make_unique<Model>(encoder_config_from_json(header.at("encoder")),
                                fusion_config_from_json(header.at("fusion")), 0, header.at("output_scale").get<double>());
    const auto& table = header.at("tensors");
    if (table.size() != m->params().size()) throw FormatError("model file: tensor count does not match the config");
    for (std::size_t i = 0; i < table.size(); ++i) {
      auto& p = m->params()[i];
      if (table[i].at("name") != p.name || table[i].at("rows") != p.value.rows() || table[i].at("cols") != p.value.cols())
        throw FormatError("model file: tensor " + std::to_string(i) + " does not match " + p.name);
      if (!in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double))))
        throw FormatError("model file: truncated tensor " + p.name);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: bad header: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("model file: bad config: ") + e.what());
  }
  return m;
}

inline std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace dhqa::model
