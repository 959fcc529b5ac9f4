#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "dhqa/model/gradcheck.hpp"
#include "dhqa/model/serialize.hpp"
#include "dhqa/model/train.hpp"

using namespace dhqa;
using namespace dhqa::model;

namespace {

EncoderConfig small_encoder() {
  EncoderConfig e;
  e.channels = 8;
  e.image_side = 32;
  e.window = 4;
  e.depths = {2, 2, 1, 1};  // two blocks so the shifted-window path runs
  return e;
}

FusionConfig small_fusion() {
  FusionConfig f;
  f.width = 16;
  f.heads = 2;
  return f;
}

FloatImage noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  FloatImage f{w, h, std::vector<double>(static_cast<std::size_t>(w) * h * 3)};
  for (auto& v : f.data) v = U(rng);
  return f;
}

/// Smooth reference; the distorted copy carries noise that grows as MOS drops.
std::vector<Sample> toy_dataset(int n, int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> M(10, 90);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    FloatImage ref{w, h, std::vector<double>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          ref.data[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
              0.5 + 0.4 * std::sin(0.2 * (i + 1) * x + 0.3 * c) * std::cos(0.15 * y + i);
    const double mos = M(rng);
    FloatImage dist = ref;
    std::normal_distribution<double> noise(0, (100 - mos) / 300.0);
    for (auto& v : dist.data) v = std::clamp(v + noise(rng), 0.0, 1.0);
    out.push_back({"s" + std::to_string(i), ref, dist, mos});
  }
  return out;
}

TrainConfig toy_train_config() {
  TrainConfig t;
  t.resize_width = 40;
  t.resize_height = 48;
  t.crop = 32;
  t.seed = 9;
  return t;
}

std::vector<Mat> snapshot(const Model& m, bool encoder) {
  std::vector<Mat> out;
  for (std::size_t i = 0; i < m.params().size(); ++i)
    if (Model::is_encoder_param(m.params()[i]) == encoder) out.push_back(m.params()[i].value);
  return out;
}

}  // namespace

TEST(EncoderConfig, SizesAndValidation) {
  EncoderConfig e;
  EXPECT_EQ(e.embedding_size(), 360);  // 24 + 48 + 96 + 192
  EXPECT_NO_THROW(e.validate());
  EXPECT_EQ(e.stage_grid(0), 56);
  EXPECT_EQ(e.stage_grid(3), 7);
  EncoderConfig bad = e;
  bad.image_side = 100;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = e;
  bad.window = 5;  // does not tile 56
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = e;
  bad.heads = 5;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Encoder, EmbeddingLayoutAndDeterminism) {
  Model m(small_encoder(), small_fusion(), 1);
  const auto img = noise_image(32, 32, 4);
  const auto a = m.encoder().encode(img), b = m.encoder().encode(img);
  EXPECT_EQ(a.size(), 15 * 8);
  EXPECT_EQ(a.offsets, (std::array<int, 5>{0, 8, 24, 56, 120}));
  EXPECT_EQ(a.values, b.values);
  EXPECT_THROW(m.encoder().encode(noise_image(64, 64, 1)), InvalidArgument);

  // All-zero input: finite, and identical for an identically seeded model.
  FloatImage zero{32, 32, std::vector<double>(32 * 32 * 3, 0.0)};
  Model twin(small_encoder(), small_fusion(), 1);
  const auto z = m.encoder().encode(zero);
  EXPECT_TRUE(z.values.allFinite());
  EXPECT_EQ(z.values, twin.encoder().encode(zero).values);
}

TEST(WindowAttention, PartitionAndMaskedRowsSumToOne) {
  ParamList params;
  std::mt19937_64 rng(2);
  for (const bool shifted : {false, true}) {
    WindowAttention attn(params, shifted ? "s" : "p", 8, 2, 8, 4, shifted);
    attn.init(rng);
    std::multiset<int> seen;
    for (std::size_t w = 0; w < attn.window_count(); ++w) seen.insert(attn.window(w).begin(), attn.window(w).end());
    EXPECT_EQ(seen.size(), 64u);
    EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), 64u);

    Mat x = Mat::Random(64, 8) * 3.0;
    WindowAttention::Cache c;
    attn.forward(x, c);
    int masked = 0;
    for (std::size_t w = 0; w < attn.window_count(); ++w)
      for (int h = 0; h < 2; ++h) {
        const Mat& p = WindowAttention::probabilities(c, w, h, 2);
        for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
        masked += static_cast<int>((p.array() == 0.0).count());
      }
    // Without a shift nothing is masked; with it the three boundary windows are.
    if (shifted)
      EXPECT_GT(masked, 0);
    else
      EXPECT_EQ(masked, 0);
  }
}

TEST(WindowAttention, ShiftedMaskSeparatesWrappedRegions) {
  // 4x4 grid, window 2, shift 1: the bottom-right window holds tokens from
  // four different corners of the original grid, which must not mix.
  ParamList params;
  WindowAttention attn(params, "a", 4, 1, 4, 2, true);
  std::mt19937_64 rng(0);
  attn.init(rng);
  const auto& last = attn.window(3);
  EXPECT_EQ(last, (std::vector<int>{15, 12, 3, 0}));
  WindowAttention::Cache c;
  attn.forward(Mat::Random(16, 4), c);
  const Mat& p = WindowAttention::probabilities(c, 3, 0, 1);
  EXPECT_EQ(p, Mat::Identity(4, 4));
}

TEST(Fusion, SingleTokenIsValueProjection) {
  FusionConfig f = small_fusion();
  f.tokens = TokenMode::Single;
  Model m(small_encoder(), f, 3);
  const auto fr = m.encoder().encode(noise_image(32, 32, 1)), fd = m.encoder().encode(noise_image(32, 32, 2));
  FusionHead::Cache c;
  const RowVec fq = m.head().fuse(fr, fd, c);
  ASSERT_EQ(fq.size(), 2 * 120 + 16);
  auto& P = m.params();
  const RowVec td = fd.values * P.find("fusion.proj.weight")->value + P.find("fusion.proj.bias")->value;
  const RowVec v = td * P.find("fusion.attn.v.weight")->value + P.find("fusion.attn.v.bias")->value;
  const RowVec expected = v * P.find("fusion.attn.o.weight")->value + P.find("fusion.attn.o.bias")->value;
  EXPECT_LT((fq.tail(16) - expected).cwiseAbs().maxCoeff(), 1e-12);
  for (const auto& w : FusionHead::attention_weights(c)) EXPECT_EQ(w, Mat::Ones(1, 1));
  EXPECT_EQ(fq.head(120), fr.values);
  EXPECT_EQ(fq.segment(120, 120), fd.values);
}

TEST(Fusion, AttentionRowsSumToOneUnderScaling) {
  Model m(small_encoder(), small_fusion(), 4);
  const auto fr = m.encoder().encode(noise_image(32, 32, 5)), fd = m.encoder().encode(noise_image(32, 32, 6));
  for (const double s : {1e-3, 1.0, 50.0}) {
    QualityEmbedding r = fr, d = fd;
    r.values *= s;
    d.values *= s;
    FusionHead::Cache c;
    m.head().fuse(r, d, c);
    const auto w = FusionHead::attention_weights(c);
    ASSERT_EQ(w.size(), 2u);
    for (const auto& p : w) {
      EXPECT_EQ(p.rows(), 4);
      for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    }
  }
  // Self-reference is a plain deterministic function.
  FusionHead::Cache c1, c2;
  const RowVec a = m.head().fuse(fr, fr, c1), b = m.head().fuse(fr, fr, c2);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.allFinite());
  QualityEmbedding shorter;
  shorter.values = RowVec::Zero(10);
  FusionHead::Cache c3;
  EXPECT_THROW(m.head().fuse(shorter, fd, c3), InvalidArgument);
}

TEST(Head, ZeroWeightsGiveBias) {
  FusionConfig f = small_fusion();
  Model m(small_encoder(), f, 5, 1.0);
  m.params().find("head.fc1.weight")->value.setZero();
  m.params().find("head.fc1.bias")->value.setZero();
  m.params().find("head.fc2.weight")->value.setZero();
  m.params().find("head.fc2.bias")->value(0, 0) = 0.37;
  for (std::uint64_t s = 0; s < 3; ++s) EXPECT_EQ(m.predict(noise_image(32, 32, s), noise_image(32, 32, s + 9)), 0.37);
  // Huge but finite input stays finite.
  Model plain(small_encoder(), f, 5);
  FusionHead::Cache c;
  RowVec big = RowVec::Constant(plain.head().fq_size(), 1e6);
  EXPECT_TRUE(std::isfinite(plain.head().predict(big, c)));
}

TEST(L1Loss, ValuesAndSubgradient) {
  std::vector<double> g;
  EXPECT_EQ(l1_loss({1, 2, 3}, {1, 2, 3}, &g), 0.0);
  EXPECT_EQ(g, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(l1_loss({3, 4, 5}, {1, 2, 3}), 2.0);
  l1_loss({0, 5}, {1, 5}, &g);
  EXPECT_EQ(g, (std::vector<double>{-0.5, 0.0}));
  l1_loss({2}, {1}, &g);
  EXPECT_EQ(g, (std::vector<double>{1.0}));
  EXPECT_THROW(l1_loss({}, {}), InvalidArgument);
  EXPECT_THROW(l1_loss({1}, {1, 2}), InvalidArgument);
}

// Property: analytic gradients agree with central differences for random
// small models, over every tensor of encoder, fusion and head.
TEST(GradientCheck, FullModel) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Model m(small_encoder(), small_fusion(), seed);
    GradCheckOptions o;
    o.seed = seed;
    const auto r = gradient_check(m, noise_image(32, 32, seed + 10), noise_image(32, 32, seed + 20), 50.0, o);
    EXPECT_FALSE(r.at_kink);
    EXPECT_GT(r.checked, 500u);
    EXPECT_LE(r.skipped, r.checked / 50);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_param;
  }
}

TEST(GradientCheck, LinearHeadWithoutAttention) {
  FusionConfig f = small_fusion();
  f.attention = false;
  Model m(small_encoder(), f, 7);
  GradCheckOptions o;
  o.prefix = "head.";
  o.entries_per_param = 400;
  const auto r = gradient_check(m, noise_image(32, 32, 1), noise_image(32, 32, 2), 50.0, o);
  EXPECT_EQ(r.checked + r.skipped, 400u + 128u + 128u + 1u);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradientCheck, KinkIsReported) {
  Model m(small_encoder(), small_fusion(), 1);
  const auto a = noise_image(32, 32, 1), b = noise_image(32, 32, 2);
  const auto r = gradient_check(m, a, b, m.predict(a, b));
  EXPECT_TRUE(r.at_kink);
  EXPECT_EQ(r.checked, 0u);
}

TEST(Train, LossDropsAndRunsAreBitIdentical) {
  const auto data = toy_dataset(8, 40, 48, 3);
  auto cfg = toy_train_config();
  cfg.epochs = 60;
  Model a(small_encoder(), small_fusion(), 11), b(small_encoder(), small_fusion(), 11);
  const auto ra = train(a, data, cfg), rb = train(b, data, cfg);
  ASSERT_EQ(ra.epoch_loss.size(), 60u);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_LT(ra.epoch_loss.back(), 0.5 * ra.epoch_loss.front());
  EXPECT_EQ(predict(a, data[0]), predict(b, data[0]));
}

TEST(Train, FreezeEncoderLeavesEncoderUntouched) {
  const auto data = toy_dataset(4, 40, 48, 4);
  auto cfg = toy_train_config();
  cfg.epochs = 5;
  cfg.freeze_encoder = true;
  Model m(small_encoder(), small_fusion(), 12);
  const auto enc = snapshot(m, true), head = snapshot(m, false);
  train(m, data, cfg);
  EXPECT_EQ(snapshot(m, true), enc);
  EXPECT_NE(snapshot(m, false), head);
}

TEST(Train, Errors) {
  Model m(small_encoder(), small_fusion(), 1);
  auto cfg = toy_train_config();
  EXPECT_THROW(train(m, {}, cfg), InvalidArgument);
  auto wrong = cfg;
  wrong.crop = 24;
  wrong.resize_width = 24;
  EXPECT_THROW(train(m, toy_dataset(2, 40, 48, 1), wrong), InvalidArgument);
  wrong = cfg;
  wrong.learning_rate = 0;
  EXPECT_THROW(train(m, toy_dataset(2, 40, 48, 1), wrong), InvalidArgument);
}

TEST(Serialization, RoundTripIsExact) {
  const auto data = toy_dataset(3, 40, 48, 5);
  Model m(small_encoder(), small_fusion(), 13);
  auto cfg = toy_train_config();
  cfg.epochs = 2;
  train(m, data, cfg);
  std::stringstream buf;
  save_model(m, buf);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "DHQAMDL1");
  const auto loaded = load_model(buf);
  EXPECT_EQ(loaded->encoder_config(), m.encoder_config());
  EXPECT_EQ(loaded->fusion_config(), m.fusion_config());
  for (const auto& s : data) EXPECT_EQ(predict(*loaded, s), predict(m, s));
  const auto crop = center_crop(data[0].reference, 32);
  const auto a = loaded->encoder().encode(crop), b = m.encoder().encode(crop);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.offsets, b.offsets);

  std::stringstream bad_magic("DHQAMDL2" + bytes.substr(8));
  EXPECT_THROW(load_model(bad_magic), FormatError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_model(truncated), FormatError);
  std::stringstream garbage(bytes.substr(0, 12) + std::string(bytes.size() - 12, 'x'));
  EXPECT_THROW(load_model(garbage), FormatError);
}
