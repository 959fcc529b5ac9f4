#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dhqa/model/tensor.hpp"

// Every layer follows one pattern: forward(x, cache) is const and records
// what backward needs; backward(dy, cache) accumulates parameter gradients
// and returns dL/dx. Caches are separate objects so one layer can be applied
// to several inputs (reference and distorted) before backpropagating.

namespace dhqa::model {

class Linear {
 public:
  struct Cache {
    Mat x;
  };

  Linear() = default;
  Linear(ParamList& params, const std::string& name, Eigen::Index in, Eigen::Index out, bool bias = true)
      : w_(&params.add(name + ".weight", in, out)), b_(bias ? &params.add(name + ".bias", 1, out) : nullptr) {}

  Eigen::Index in() const { return w_->value.rows(); }
  Eigen::Index out() const { return w_->value.cols(); }
  Param& weight() const { return *w_; }
  Param* bias() const { return b_; }

  void init(std::mt19937_64& rng) const { init_fan_in(*w_, in(), rng); }

  Mat forward(const Mat& x, Cache& c) const {
    c.x = x;
    return apply(x);
  }
  Mat apply(const Mat& x) const {
    if (x.cols() != in()) throw InvalidArgument(w_->name + ": input width mismatch");
    Mat y = x * w_->value;
    if (b_) y.rowwise() += b_->value.row(0);
    return y;
  }
  Mat backward(const Mat& dy, const Cache& c) const {
    w_->grad.noalias() += c.x.transpose() * dy;
    if (b_) b_->grad.row(0) += dy.colwise().sum();
    return dy * w_->value.transpose();
  }

 private:
  Param* w_ = nullptr;
  Param* b_ = nullptr;
};

class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat xhat;
    Eigen::VectorXd inv_std;
  };

  LayerNorm() = default;
  LayerNorm(ParamList& params, const std::string& name, Eigen::Index dim)
      : g_(&params.add(name + ".gamma", 1, dim)), b_(&params.add(name + ".beta", 1, dim)) {}

  void init() const {
    g_->value.setOnes();
    b_->value.setZero();
  }

  Mat forward(const Mat& x, Cache& c) const {
    const Eigen::Index n = x.rows(), d = x.cols();
    c.xhat.resize(n, d);
    c.inv_std.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = x.row(i).mean();
      const double var = (x.row(i).array() - mu).square().mean();
      c.inv_std(i) = 1.0 / std::sqrt(var + kEps);
      c.xhat.row(i) = (x.row(i).array() - mu) * c.inv_std(i);
    }
    Mat y = c.xhat.array().rowwise() * g_->value.row(0).array();
    y.rowwise() += b_->value.row(0);
    return y;
  }
  Mat backward(const Mat& dy, const Cache& c) const {
    g_->grad.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    b_->grad.row(0) += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * g_->value.row(0).array();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const double m1 = dxhat.row(i).mean();
      const double m2 = (dxhat.row(i).array() * c.xhat.row(i).array()).mean();
      dx.row(i) = (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2) * c.inv_std(i);
    }
    return dx;
  }

 private:
  Param* g_ = nullptr;
  Param* b_ = nullptr;
};

/// Exact (erf) GELU.
struct Gelu {
  struct Cache {
    Mat x;
  };
  static Mat forward(const Mat& x, Cache& c) {
    c.x = x;
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
  }
  static Mat backward(const Mat& dy, const Cache& c) {
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    const Mat d = c.x.unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    });
    return dy.cwiseProduct(d);
  }
};

struct Relu {
  struct Cache {
    Mat x;
  };
  static Mat forward(const Mat& x, Cache& c) {
    c.x = x;
    return x.cwiseMax(0.0);
  }
  static Mat backward(const Mat& dy, const Cache& c) {
    return dy.array() * (c.x.array() > 0.0).cast<double>();
  }
};

/// Row-wise softmax; -inf entries get probability 0.
inline Mat softmax_rows(const Mat& s) {
  Mat p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - mx).unaryExpr([](double v) { return std::exp(v); });
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// dL/dS for P = softmax_rows(S) given dL/dP.
inline Mat softmax_rows_backward(const Mat& p, const Mat& dp) {
  const Eigen::VectorXd dot = (dp.array() * p.array()).rowwise().sum();
  return p.array() * (dp.array().colwise() - dot.array());
}

/// Scaled dot-product attention for one head with an optional additive
/// logit bias (-inf masks a pair).
struct HeadAttention {
  struct Cache {
    Mat q, k, v, p;
  };
  static Mat forward(const Mat& q, const Mat& k, const Mat& v, const Mat* bias, Cache& c) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Mat s = q * k.transpose() * scale;
    if (bias) s += *bias;
    c.q = q;
    c.k = k;
    c.v = v;
    c.p = softmax_rows(s);
    return c.p * v;
  }
  static void backward(const Mat& dout, const Cache& c, Mat& dq, Mat& dk, Mat& dv) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols()));
    dv = c.p.transpose() * dout;
    const Mat ds = softmax_rows_backward(c.p, dout * c.v.transpose()) * scale;
    dq = ds * c.k;
    dk = ds.transpose() * c.q;
  }
};

/// Multi-head self-attention inside non-overlapping windows of a square
/// token grid, optionally on the cyclically shifted grid. Tokens of a shifted
/// window that came from different image regions do not attend to each other.
class WindowAttention {
 public:
  struct Cache {
    Linear::Cache qkv, proj;
    std::vector<HeadAttention::Cache> heads;  // window-major, then head
  };

  WindowAttention() = default;
  WindowAttention(ParamList& params, const std::string& name, int dim, int heads, int grid, int window, bool shifted)
      : dim_(dim), heads_(heads), qkv_(params, name + ".qkv", dim, 3 * dim), proj_(params, name + ".proj", dim, dim) {
    if (heads <= 0 || dim % heads != 0) throw InvalidArgument(name + ": dim must be divisible by heads");
    const int w = std::min(window, grid);
    if (w <= 0 || grid % w != 0) throw InvalidArgument(name + ": window must divide the token grid");
    const int shift = (shifted && w < grid) ? w / 2 : 0;
    // Region id of a shifted-frame coordinate, as in the masked cyclic shift.
    auto region = [&](int t) { return shift == 0 ? 0 : (t < grid - w ? 0 : (t < grid - shift ? 1 : 2)); };
    for (int wr = 0; wr < grid; wr += w)
      for (int wc = 0; wc < grid; wc += w) {
        std::vector<int> idx, reg;
        for (int r = wr; r < wr + w; ++r)
          for (int c = wc; c < wc + w; ++c) {
            idx.push_back(((r + shift) % grid) * grid + (c + shift) % grid);
            reg.push_back(region(r) * 3 + region(c));
          }
        windows_.push_back(idx);
        Mat bias = Mat::Zero(w * w, w * w);
        bool any = false;
        for (int i = 0; i < w * w; ++i)
          for (int j = 0; j < w * w; ++j)
            if (reg[i] != reg[j]) {
              bias(i, j) = -std::numeric_limits<double>::infinity();
              any = true;
            }
        masks_.push_back(any ? bias : Mat());
      }
  }

  void init(std::mt19937_64& rng) const {
    qkv_.init(rng);
    proj_.init(rng);
  }
  std::size_t window_count() const { return windows_.size(); }
  const std::vector<int>& window(std::size_t i) const { return windows_[i]; }

  Mat forward(const Mat& x, Cache& c) const {
    const Mat qkv = qkv_.forward(x, c.qkv);
    const int dh = dim_ / heads_;
    Mat out(x.rows(), dim_);
    c.heads.assign(windows_.size() * heads_, {});
    for (std::size_t w = 0; w < windows_.size(); ++w) {
      const auto& idx = windows_[w];
      const Mat* mask = masks_[w].size() ? &masks_[w] : nullptr;
      for (int h = 0; h < heads_; ++h) {
        const Mat q = qkv(idx, Eigen::seqN(h * dh, dh));
        const Mat k = qkv(idx, Eigen::seqN(dim_ + h * dh, dh));
        const Mat v = qkv(idx, Eigen::seqN(2 * dim_ + h * dh, dh));
        out(idx, Eigen::seqN(h * dh, dh)) = HeadAttention::forward(q, k, v, mask, c.heads[w * heads_ + h]);
      }
    }
    return proj_.forward(out, c.proj);
  }

  Mat backward(const Mat& dy, const Cache& c) const {
    const Mat dout = proj_.backward(dy, c.proj);
    const int dh = dim_ / heads_;
    Mat dqkv = Mat::Zero(dy.rows(), 3 * dim_);
    Mat dq, dk, dv;
    for (std::size_t w = 0; w < windows_.size(); ++w) {
      const auto& idx = windows_[w];
      for (int h = 0; h < heads_; ++h) {
        HeadAttention::backward(dout(idx, Eigen::seqN(h * dh, dh)), c.heads[w * heads_ + h], dq, dk, dv);
        dqkv(idx, Eigen::seqN(h * dh, dh)) = dq;
        dqkv(idx, Eigen::seqN(dim_ + h * dh, dh)) = dk;
        dqkv(idx, Eigen::seqN(2 * dim_ + h * dh, dh)) = dv;
      }
    }
    return qkv_.backward(dqkv, c.qkv);
  }

  /// Attention probabilities of the last forward, for inspection.
  static const Mat& probabilities(const Cache& c, std::size_t window, int head, int heads) {
    return c.heads[window * heads + head].p;
  }

 private:
  int dim_ = 0;
  int heads_ = 1;
  Linear qkv_, proj_;
  std::vector<std::vector<int>> windows_;
  std::vector<Mat> masks_;
};

/// Pre-norm transformer block: x + attn(LN(x)), then + mlp(LN(.)).
class TransformerBlock {
 public:
  struct Cache {
    LayerNorm::Cache ln1, ln2;
    WindowAttention::Cache attn;
    Linear::Cache fc1, fc2;
    Gelu::Cache act;
  };

  TransformerBlock() = default;
  TransformerBlock(ParamList& params, const std::string& name, int dim, int heads, int grid, int window, bool shifted,
                   int mlp_ratio)
      : ln1_(params, name + ".norm1", dim),
        attn_(params, name + ".attn", dim, heads, grid, window, shifted),
        ln2_(params, name + ".norm2", dim),
        fc1_(params, name + ".mlp.fc1", dim, mlp_ratio * dim),
        fc2_(params, name + ".mlp.fc2", mlp_ratio * dim, dim) {}

  void init(std::mt19937_64& rng) const {
    ln1_.init();
    attn_.init(rng);
    ln2_.init();
    fc1_.init(rng);
    fc2_.init(rng);
  }

  Mat forward(const Mat& x, Cache& c) const {
    const Mat x1 = x + attn_.forward(ln1_.forward(x, c.ln1), c.attn);
    return x1 + fc2_.forward(Gelu::forward(fc1_.forward(ln2_.forward(x1, c.ln2), c.fc1), c.act), c.fc2);
  }
  Mat backward(const Mat& dy, const Cache& c) const {
    const Mat dx1 = dy + ln2_.backward(fc1_.backward(Gelu::backward(fc2_.backward(dy, c.fc2), c.act), c.fc1), c.ln2);
    return dx1 + ln1_.backward(attn_.backward(dx1, c.attn), c.ln1);
  }

 private:
  LayerNorm ln1_;
  WindowAttention attn_;
  LayerNorm ln2_;
  Linear fc1_, fc2_;
};

/// Concatenates each 2x2 token neighbourhood (4D), normalizes, and maps to 2D.
class PatchMerge {
 public:
  struct Cache {
    LayerNorm::Cache ln;
    Linear::Cache lin;
  };

  PatchMerge() = default;
  PatchMerge(ParamList& params, const std::string& name, int dim, int grid)
      : dim_(dim), grid_(grid), ln_(params, name + ".norm", 4 * dim), lin_(params, name + ".reduction", 4 * dim, 2 * dim, false) {
    if (grid % 2 != 0) throw InvalidArgument(name + ": grid must be even");
  }

  void init(std::mt19937_64& rng) const {
    ln_.init();
    lin_.init(rng);
  }

  Mat forward(const Mat& x, Cache& c) const { return lin_.forward(ln_.forward(gather(x), c.ln), c.lin); }
  Mat backward(const Mat& dy, const Cache& c) const { return scatter(ln_.backward(lin_.backward(dy, c.lin), c.ln)); }

 private:
  // Neighbour order (0,0), (1,0), (0,1), (1,1) in (row, col).
  static constexpr int kDr[4] = {0, 1, 0, 1};
  static constexpr int kDc[4] = {0, 0, 1, 1};

  Mat gather(const Mat& x) const {
    const int g2 = grid_ / 2;
    Mat out(g2 * g2, 4 * dim_);
    for (int r = 0; r < g2; ++r)
      for (int c = 0; c < g2; ++c)
        for (int k = 0; k < 4; ++k)
          out.block(r * g2 + c, k * dim_, 1, dim_) = x.row((2 * r + kDr[k]) * grid_ + 2 * c + kDc[k]);
    return out;
  }
  Mat scatter(const Mat& d) const {
    const int g2 = grid_ / 2;
    Mat out(grid_ * grid_, dim_);
    for (int r = 0; r < g2; ++r)
      for (int c = 0; c < g2; ++c)
        for (int k = 0; k < 4; ++k)
          out.row((2 * r + kDr[k]) * grid_ + 2 * c + kDc[k]) = d.block(r * g2 + c, k * dim_, 1, dim_);
    return out;
  }

  int dim_ = 0;
  int grid_ = 0;
  LayerNorm ln_;
  Linear lin_;
};

}  // namespace dhqa::model
