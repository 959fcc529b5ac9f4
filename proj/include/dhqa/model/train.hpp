#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dhqa/image.hpp"
#include "dhqa/model/model.hpp"

namespace dhqa::model {

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 50;
  int batch_size = 32;
  int resize_width = 256;
  int resize_height = 456;
  int crop = 224;
  std::uint64_t seed = 0;
  bool freeze_encoder = false;

  void validate() const {
    if (!(learning_rate > 0.0) || !(beta1 > 0.0) || !(beta2 > 0.0) || !(epsilon > 0.0) || epochs <= 0 ||
        batch_size <= 0 || resize_width <= 0 || resize_height <= 0 || crop <= 0)
      throw InvalidArgument("training hyperparameters must be positive");
    if (beta1 >= 1.0 || beta2 >= 1.0) throw InvalidArgument("Adam betas must be below 1");
    if (crop > resize_width || crop > resize_height) throw InvalidArgument("crop larger than the resized image");
  }
};

/// A (reference, distorted, MOS) triplet with images already resized.
struct Sample {
  std::string id;
  FloatImage reference;
  FloatImage distorted;
  double mos = 0.0;
};

inline FloatImage prepare_image(const TextureImage& img, const TrainConfig& cfg) {
  return to_float(resize_bilinear(img, cfg.resize_width, cfg.resize_height));
}

inline FloatImage center_crop(const FloatImage& img, int side) {
  return crop(img, (img.width - side) / 2, (img.height - side) / 2, side, side);
}

/// Prediction on the center crop, the test-time convention.
inline double predict(const Model& m, const Sample& s) {
  const int side = m.encoder_config().image_side;
  return m.predict(center_crop(s.reference, side), center_crop(s.distorted, side));
}

class Adam {
 public:
  explicit Adam(const TrainConfig& cfg) : cfg_(cfg) {}

  void step(ParamList& params, const std::function<bool(const Param&)>& trainable) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_), c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = params[i];
      if (!trainable(p)) continue;
      p.m = cfg_.beta1 * p.m + (1.0 - cfg_.beta1) * p.grad;
      p.v = cfg_.beta2 * p.v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
      p.value.array() -= cfg_.learning_rate * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + cfg_.epsilon);
    }
  }
  int steps() const { return t_; }

 private:
  TrainConfig cfg_;
  int t_ = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;  ///< mean training L1 per epoch, MOS units
};

/// Mini-batch Adam on the L1 loss. Each epoch shuffles the samples and draws
/// one random crop per sample, shared by its reference and distorted image.
/// `on_epoch` (optional) sees the epoch index and its loss.
inline TrainResult train(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg,
                         const std::function<void(int, double)>& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  const int side = m.encoder_config().image_side;
  if (side != cfg.crop)
    throw InvalidArgument("train: crop " + std::to_string(cfg.crop) + " does not match the encoder input " +
                          std::to_string(side));
  for (const auto& s : data)
    if (s.reference.width < side || s.reference.height < side || s.distorted.width != s.reference.width ||
        s.distorted.height != s.reference.height)
      throw InvalidArgument("train: sample " + s.id + " has unusable image sizes");

  std::mt19937_64 rng(cfg.seed);
  Adam adam(cfg);
  const auto trainable = [&](const Param& p) { return !(cfg.freeze_encoder && Model::is_encoder_param(p)); };
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult out;
  Model::Cache cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double n = static_cast<double>(end - start);
      m.params().zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = data[order[b]];
        std::uniform_int_distribution<int> X(0, s.reference.width - side), Y(0, s.reference.height - side);
        const int x0 = X(rng), y0 = Y(rng);
        const double pred = m.forward(crop(s.reference, x0, y0, side, side), crop(s.distorted, x0, y0, side, side), cache);
        const double err = pred - s.mos;
        if (!std::isfinite(err))
          throw Error("train: non-finite prediction at epoch " + std::to_string(epoch + 1) + " on sample " + s.id);
        total += std::abs(err);
        m.backward(err > 0.0 ? 1.0 / n : (err < 0.0 ? -1.0 / n : 0.0), cache, !cfg.freeze_encoder);
      }
      adam.step(m.params(), trainable);
    }
    out.epoch_loss.push_back(total / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch, out.epoch_loss.back());
  }
  return out;
}

}  // namespace dhqa::model
