#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dhqa/model/encoder.hpp"
#include "dhqa/model/fusion.hpp"

namespace dhqa::model {

/// Full-reference quality model: shared encoder for both projections, then
/// attention fusion and regression. Predictions are `output_scale` times the
/// regressor output, so the network itself works on a unit scale.
class Model {
 public:
  struct Cache {
    Encoder::Cache ref, dist;
    FusionHead::Cache head;
    QualityEmbedding fr, fd;
  };

  Model(const EncoderConfig& enc, const FusionConfig& fusion, std::uint64_t seed, double output_scale = 100.0)
      : encoder_(params_, enc), head_(params_, enc, fusion), output_scale_(output_scale) {
    if (!(output_scale > 0.0)) throw InvalidArgument("output scale must be positive");
    std::mt19937_64 rng(seed);
    encoder_.init(rng);
    head_.init(rng);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const FusionHead& head() const { return head_; }
  const EncoderConfig& encoder_config() const { return encoder_.config(); }
  const FusionConfig& fusion_config() const { return head_.config(); }
  double output_scale() const { return output_scale_; }

  static bool is_encoder_param(const Param& p) { return p.name.rfind("encoder.", 0) == 0; }

  double forward(const FloatImage& ref, const FloatImage& dist, Cache& c) const {
    c.fr = encoder_.forward(ref, c.ref);
    c.fd = encoder_.forward(dist, c.dist);
    return output_scale_ * head_.forward(c.fr, c.fd, c.head);
  }

  double predict(const FloatImage& ref, const FloatImage& dist) const {
    Cache c;
    return forward(ref, dist, c);
  }

  /// Accumulates gradients for dL/dprediction. The encoder pass is skipped
  /// when `through_encoder` is false.
  void backward(double dpred, const Cache& c, bool through_encoder = true) const {
    const auto [dr, dd] = head_.backward(output_scale_ * dpred, c.head);
    if (!through_encoder) return;
    encoder_.backward(dr, c.ref);
    encoder_.backward(dd, c.dist);
  }

 private:
  ParamList params_;
  Encoder encoder_;
  FusionHead head_;
  double output_scale_;
};

/// Mean absolute error and its gradient with respect to each prediction. The
/// subgradient at a tie is 0.
inline double l1_loss(const std::vector<double>& pred, const std::vector<double>& label, std::vector<double>* grad = nullptr) {
  if (pred.empty()) throw InvalidArgument("l1_loss: empty batch");
  if (pred.size() != label.size()) throw InvalidArgument("l1_loss: size mismatch");
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  if (grad) grad->assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - label[i];
    sum += std::abs(d);
    if (grad) (*grad)[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
  }
  return sum / n;
}

}  // namespace dhqa::model
