#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dhqa/model/model.hpp"

namespace dhqa::model {

struct GradCheckOptions {
  double step = 1e-4;
  std::size_t entries_per_param = 6;  ///< random entries per tensor; 0 checks every entry
  double floor = 1e-6;                ///< denominator floor, relative to max(1, loss)
  std::uint64_t seed = 0;
  std::string prefix;  ///< only tensors whose name starts with this
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  std::size_t skipped = 0;  ///< perturbations that crossed a ReLU or L1 kink
  bool at_kink = false;     ///< prediction equals the label; nothing checked
};

namespace detail {

struct Probe {
  double loss = 0.0;
  std::vector<bool> signature;  // ReLU pattern plus the L1 sign
};

inline Probe probe(const Model& m, const FloatImage& ref, const FloatImage& dist, double label, Model::Cache& c) {
  const double pred = m.forward(ref, dist, c);
  Probe p{std::abs(pred - label), {}};
  const auto& x = c.head.act.x;
  for (Eigen::Index i = 0; i < x.size(); ++i) p.signature.push_back(x.data()[i] > 0.0);
  p.signature.push_back(pred > label);
  return p;
}

}  // namespace detail

/// Central finite differences of the single-sample L1 loss against the
/// analytic gradient, over every parameter tensor. Relative error is
/// |a - n| / max(|a|, |n|, floor * max(1, loss)); the floor follows the loss
/// because finite-difference roundoff does. Perturbations that change the ReLU
/// pattern or the L1 sign are skipped.
inline GradCheckResult gradient_check(Model& m, const FloatImage& ref, const FloatImage& dist, double label,
                                      const GradCheckOptions& opt = {}) {
  GradCheckResult r;
  auto& params = m.params();
  params.zero_grad();
  Model::Cache c;
  const auto base = detail::probe(m, ref, dist, label, c);
  if (base.loss == 0.0) {
    r.at_kink = true;
    return r;
  }
  m.backward(base.signature.back() ? 1.0 : -1.0, c);

  const double floor = opt.floor * std::max(1.0, base.loss);
  std::mt19937_64 rng(opt.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = params[pi];
    if (p.name.rfind(opt.prefix, 0) != 0) continue;
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(p.size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (opt.entries_per_param && entries.size() > opt.entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(opt.entries_per_param);
    }
    for (const auto e : entries) {
      double& w = p.value.data()[e];
      const double saved = w;
      w = saved + opt.step;
      const auto plus = detail::probe(m, ref, dist, label, c);
      w = saved - opt.step;
      const auto minus = detail::probe(m, ref, dist, label, c);
      w = saved;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++r.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * opt.step);
      const double analytic = p.grad.data()[e];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_param = p.name;
      }
    }
  }
  return r;
}

}  // namespace dhqa::model
