#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dhqa/common.hpp"

namespace dhqa::model {

/// Row-major so that one row is one token.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A trainable tensor with its gradient and Adam moments.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;
  Mat v;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Mat::Zero(rows, cols);
    grad = m = v = value;
  }
  Eigen::Index size() const { return value.size(); }
};

/// Flat, ordered list of parameters. Order fixes serialization and the
/// RNG stream used by initialization.
class ParamList {
 public:
  Param& add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    params_.push_back(std::make_unique<Param>());
    auto& p = *params_.back();
    p.name = std::move(name);
    p.resize(rows, cols);
    return p;
  }
  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }
  Param* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }
  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline void init_fan_in(Param& p, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> U(-a, a);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = U(rng);
}

}  // namespace dhqa::model
