#pragma once

#include <string>
#include <vector>

#include "dhqa/model/encoder.hpp"

namespace dhqa::model {

enum class TokenMode {
  Stages,  ///< one token per encoder stage (4 per side)
  Single,  ///< the whole embedding as one token; softmax is then trivially 1
};

struct FusionConfig {
  int width = 32;  ///< d, the common token width
  int heads = 4;
  TokenMode tokens = TokenMode::Stages;
  bool attention = true;  ///< false drops F_a, leaving F_q = F_r ++ F_d
  int hidden = 128;

  void validate() const {
    if (width <= 0 || heads <= 0 || hidden <= 0) throw InvalidArgument("fusion: sizes must be positive");
    if (width % heads != 0) throw InvalidArgument("fusion: width must be divisible by heads");
  }
  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

/// Cross-attention fusion (reference tokens query distorted tokens) followed
/// by a two-layer regressor on F_r ++ F_d ++ F_a.
class FusionHead {
 public:
  struct Cache {
    std::vector<Linear::Cache> proj_r, proj_d;
    Linear::Cache q, k, v, o, fc1, fc2;
    std::vector<HeadAttention::Cache> heads;
    Relu::Cache act;
    RowVec fq;
  };

  FusionHead() = default;
  FusionHead(ParamList& params, const EncoderConfig& enc, const FusionConfig& cfg) : enc_(enc), cfg_(cfg) {
    cfg.validate();
    const int d = cfg.width;
    if (cfg.attention) {
      if (cfg.tokens == TokenMode::Stages)
        for (int k = 0; k < kStages; ++k)
          proj_.emplace_back(params, "fusion.proj" + std::to_string(k), enc.stage_channels(k), d);
      else
        proj_.emplace_back(params, "fusion.proj", enc.embedding_size(), d);
      wq_ = Linear(params, "fusion.attn.q", d, d);
      wk_ = Linear(params, "fusion.attn.k", d, d);
      wv_ = Linear(params, "fusion.attn.v", d, d);
      wo_ = Linear(params, "fusion.attn.o", d, d);
    }
    fc1_ = Linear(params, "head.fc1", fq_size(), cfg.hidden);
    fc2_ = Linear(params, "head.fc2", cfg.hidden, 1);
  }

  const FusionConfig& config() const { return cfg_; }
  int fq_size() const { return 2 * enc_.embedding_size() + (cfg_.attention ? cfg_.width : 0); }

  void init(std::mt19937_64& rng) const {
    for (const auto& p : proj_) p.init(rng);
    if (cfg_.attention)
      for (const auto* l : {&wq_, &wk_, &wv_, &wo_}) l->init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
  }

  /// F_q = F_r ++ F_d ++ F_a.
  RowVec fuse(const QualityEmbedding& fr, const QualityEmbedding& fd, Cache& c) const {
    const int n = enc_.embedding_size();
    if (fr.size() != n || fd.size() != n)
      throw InvalidArgument("fusion expects embeddings of length " + std::to_string(n));
    RowVec fq(fq_size());
    fq << fr.values, fd.values, RowVec::Zero(fq_size() - 2 * n);
    if (cfg_.attention) fq.tail(cfg_.width) = attend(tokens(fr, proj_, c.proj_r), tokens(fd, proj_, c.proj_d), c);
    c.fq = fq;
    return fq;
  }

  double predict(const RowVec& fq, Cache& c) const {
    const Mat h = Relu::forward(fc1_.forward(fq, c.fc1), c.act);
    return fc2_.forward(h, c.fc2)(0, 0);
  }

  double forward(const QualityEmbedding& fr, const QualityEmbedding& fd, Cache& c) const {
    return predict(fuse(fr, fd, c), c);
  }

  /// Accumulates head gradients; returns dL/dF_r and dL/dF_d.
  std::pair<RowVec, RowVec> backward(double dpred, const Cache& c) const {
    const Mat dfq = fc1_.backward(Relu::backward(fc2_.backward(Mat::Constant(1, 1, dpred), c.fc2), c.act), c.fc1);
    const int n = enc_.embedding_size();
    RowVec dr = dfq.leftCols(n), dd = dfq.middleCols(n, n);
    if (cfg_.attention) {
      const int d = cfg_.width, dh = d / cfg_.heads;
      const Eigen::Index t = static_cast<Eigen::Index>(proj_.size());
      // F_a is the mean over query tokens.
      const Mat dA = RowVec(dfq.rightCols(d)).replicate(t, 1) / static_cast<double>(t);
      const Mat dO = wo_.backward(dA, c.o);
      Mat dQ(t, d), dK(t, d), dV(t, d), dq, dk, dv;
      for (int h = 0; h < cfg_.heads; ++h) {
        HeadAttention::backward(dO.middleCols(h * dh, dh), c.heads[h], dq, dk, dv);
        dQ.middleCols(h * dh, dh) = dq;
        dK.middleCols(h * dh, dh) = dk;
        dV.middleCols(h * dh, dh) = dv;
      }
      const Mat dRt = wq_.backward(dQ, c.q);
      const Mat dDt = wk_.backward(dK, c.k) + wv_.backward(dV, c.v);
      token_backward(dRt, c.proj_r, dr);
      token_backward(dDt, c.proj_d, dd);
    }
    return {dr, dd};
  }

  /// Attention weights of the last forward: one t x t matrix per head.
  static std::vector<Mat> attention_weights(const Cache& c) {
    std::vector<Mat> out;
    for (const auto& h : c.heads) out.push_back(h.p);
    return out;
  }

 private:
  Mat tokens(const QualityEmbedding& e, const std::vector<Linear>& proj, std::vector<Linear::Cache>& caches) const {
    caches.assign(proj.size(), {});
    Mat t(static_cast<Eigen::Index>(proj.size()), cfg_.width);
    if (cfg_.tokens == TokenMode::Single) {
      t.row(0) = proj[0].forward(e.values, caches[0]);
    } else {
      for (int k = 0; k < kStages; ++k) t.row(k) = proj[k].forward(e.segment(k), caches[k]);
    }
    return t;
  }

  void token_backward(const Mat& dt, const std::vector<Linear::Cache>& caches, RowVec& de) const {
    if (cfg_.tokens == TokenMode::Single) {
      de += proj_[0].backward(dt.row(0), caches[0]);
      return;
    }
    const int C = enc_.channels;
    int offset = 0;
    for (int k = 0; k < kStages; ++k) {
      de.segment(offset, C << k) += proj_[k].backward(dt.row(k), caches[k]);
      offset += C << k;
    }
  }

  RowVec attend(const Mat& r, const Mat& d, Cache& c) const {
    const Mat q = wq_.forward(r, c.q), k = wk_.forward(d, c.k), v = wv_.forward(d, c.v);
    const int dh = cfg_.width / cfg_.heads;
    Mat o(r.rows(), cfg_.width);
    c.heads.assign(cfg_.heads, {});
    for (int h = 0; h < cfg_.heads; ++h)
      o.middleCols(h * dh, dh) =
          HeadAttention::forward(q.middleCols(h * dh, dh), k.middleCols(h * dh, dh), v.middleCols(h * dh, dh), nullptr,
                                 c.heads[h]);
    return wo_.forward(o, c.o).colwise().mean();
  }

  EncoderConfig enc_;
  FusionConfig cfg_;
  std::vector<Linear> proj_;
  Linear wq_, wk_, wv_, wo_, fc1_, fc2_;
};

}  // namespace dhqa::model
