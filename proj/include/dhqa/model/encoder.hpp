#pragma once

#include <array>
#include <string>
#include <vector>

#include "dhqa/image.hpp"
#include "dhqa/model/layers.hpp"

namespace dhqa::model {

inline constexpr int kStages = 4;

struct EncoderConfig {
  int channels = 24;                      ///< C; stage k has C * 2^k channels
  std::array<int, kStages> depths{1, 1, 1, 1};
  int heads = 1;                          ///< heads in stage 0, doubled per stage
  int window = 7;
  int patch = 4;
  int image_side = 224;
  int mlp_ratio = 4;

  int stage_channels(int k) const { return channels << k; }
  int stage_heads(int k) const { return heads << k; }
  int stage_grid(int k) const { return image_side / patch >> k; }
  int embedding_size() const { return 15 * channels; }

  void validate() const {
    if (channels <= 0 || heads <= 0 || window <= 0 || mlp_ratio <= 0) throw InvalidArgument("encoder: sizes must be positive");
    if (patch != 4) throw InvalidArgument("encoder: patch size must be 4");
    if (image_side <= 0 || image_side % 32 != 0) throw InvalidArgument("encoder: image side must be a positive multiple of 32");
    for (int d : depths)
      if (d <= 0) throw InvalidArgument("encoder: stage depths must be positive");
    for (int k = 0; k < kStages; ++k) {
      if (stage_channels(k) % stage_heads(k) != 0) throw InvalidArgument("encoder: channels must be divisible by heads");
      const int g = stage_grid(k);
      if (g % std::min(window, g) != 0)
        throw InvalidArgument("encoder: window " + std::to_string(window) + " does not tile the " + std::to_string(g) +
                              "x" + std::to_string(g) + " grid of stage " + std::to_string(k));
    }
  }
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// RGB in [0,1], row-major, interleaved.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

inline FloatImage to_float(const TextureImage& img) {
  FloatImage f{img.width(), img.height(), std::vector<double>(img.data().size())};
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = img.data()[i] / 255.0;
  return f;
}

inline FloatImage crop(const FloatImage& src, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width <= 0 || height <= 0 || x0 + width > src.width || y0 + height > src.height)
    throw InvalidArgument("crop window outside the image");
  FloatImage out{width, height, std::vector<double>(static_cast<std::size_t>(width) * height * 3)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) out.data[(static_cast<std::size_t>(y) * width + x) * 3 + c] = src.at(x0 + x, y0 + y, c);
  return out;
}

/// Pooled per-stage features, alpha_0 ++ alpha_1 ++ alpha_2 ++ alpha_3.
struct QualityEmbedding {
  RowVec values;
  std::array<int, kStages + 1> offsets{};  ///< stage k occupies [offsets[k], offsets[k+1])

  RowVec segment(int k) const { return values.segment(offsets[k], offsets[k + 1] - offsets[k]); }
  int size() const { return static_cast<int>(values.size()); }
};

/// Four-stage windowed-attention encoder: 4x4 patch embedding, then per stage
/// an optional 2x2 merge and transformer blocks whose windows alternate
/// between plain and shifted. Each stage output is average-pooled.
class Encoder {
 public:
  struct Cache {
    Linear::Cache embed;
    LayerNorm::Cache embed_norm;
    std::array<PatchMerge::Cache, kStages> merge;
    std::array<std::vector<TransformerBlock::Cache>, kStages> blocks;
    std::array<Eigen::Index, kStages> tokens{};
  };

  Encoder() = default;
  Encoder(ParamList& params, const EncoderConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int C = cfg.channels;
    embed_ = Linear(params, "encoder.patch_embed", 3 * cfg.patch * cfg.patch, C);
    embed_norm_ = LayerNorm(params, "encoder.patch_norm", C);
    for (int k = 0; k < kStages; ++k) {
      const std::string stage = "encoder.stage" + std::to_string(k);
      if (k > 0) merge_[k] = PatchMerge(params, stage + ".merge", cfg.stage_channels(k - 1), cfg.stage_grid(k - 1));
      for (int b = 0; b < cfg.depths[k]; ++b)
        blocks_[k].emplace_back(params, stage + ".block" + std::to_string(b), cfg.stage_channels(k), cfg.stage_heads(k),
                                cfg.stage_grid(k), cfg.window, b % 2 == 1, cfg.mlp_ratio);
    }
  }

  const EncoderConfig& config() const { return cfg_; }

  void init(std::mt19937_64& rng) const {
    embed_.init(rng);
    embed_norm_.init();
    for (int k = 0; k < kStages; ++k) {
      if (k > 0) merge_[k].init(rng);
      for (const auto& b : blocks_[k]) b.init(rng);
    }
  }

  QualityEmbedding forward(const FloatImage& img, Cache& c) const {
    if (img.width != cfg_.image_side || img.height != cfg_.image_side)
      throw InvalidArgument("encoder expects " + std::to_string(cfg_.image_side) + "x" + std::to_string(cfg_.image_side) +
                            " input, got " + std::to_string(img.width) + "x" + std::to_string(img.height));
    QualityEmbedding e;
    e.values.resize(cfg_.embedding_size());
    Mat x = embed_norm_.forward(embed_.forward(patchify(img), c.embed), c.embed_norm);
    for (int k = 0; k < kStages; ++k) {
      if (k > 0) x = merge_[k].forward(x, c.merge[k]);
      c.blocks[k].resize(blocks_[k].size());
      for (std::size_t b = 0; b < blocks_[k].size(); ++b) x = blocks_[k][b].forward(x, c.blocks[k][b]);
      c.tokens[k] = x.rows();
      e.values.segment(e.offsets[k], x.cols()) = x.colwise().mean();
      e.offsets[k + 1] = e.offsets[k] + static_cast<int>(x.cols());
    }
    return e;
  }

  QualityEmbedding encode(const FloatImage& img) const {
    Cache c;
    return forward(img, c);
  }

  /// Accumulates parameter gradients for dL/d(embedding).
  void backward(const RowVec& d_embedding, const Cache& c) const {
    Mat dx;
    int offset = cfg_.embedding_size();
    for (int k = kStages - 1; k >= 0; --k) {
      const int ch = cfg_.stage_channels(k);
      offset -= ch;
      // Mean pooling spreads the gradient evenly over the tokens.
      Mat dpool = d_embedding.segment(offset, ch).replicate(c.tokens[k], 1) / static_cast<double>(c.tokens[k]);
      dx = dx.size() ? Mat(dx + dpool) : dpool;
      for (std::size_t b = blocks_[k].size(); b-- > 0;) dx = blocks_[k][b].backward(dx, c.blocks[k][b]);
      if (k > 0) dx = merge_[k].backward(dx, c.merge[k]);
    }
    embed_.backward(embed_norm_.backward(dx, c.embed_norm), c.embed);
  }

 private:
  /// One row per 4x4 patch, row-major over patches; within a patch the
  /// layout is (dy, dx, channel).
  Mat patchify(const FloatImage& img) const {
    const int p = cfg_.patch, g = cfg_.stage_grid(0);
    Mat out(g * g, 3 * p * p);
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px)
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx)
            for (int ch = 0; ch < 3; ++ch) out(py * g + px, (dy * p + dx) * 3 + ch) = img.at(px * p + dx, py * p + dy, ch);
    return out;
  }

  EncoderConfig cfg_;
  Linear embed_;
  LayerNorm embed_norm_;
  std::array<PatchMerge, kStages> merge_;
  std::array<std::vector<TransformerBlock>, kStages> blocks_;
};

}  // namespace dhqa::model
