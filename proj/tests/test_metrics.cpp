#include <gtest/gtest.h>

#include <random>

#include "dhqa/metrics/image_metrics.hpp"
#include "dhqa/metrics/point_cloud.hpp"
#include "dhqa/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dhqa;
using namespace dhqa::metrics;

namespace {

TextureImage perturbed(const TextureImage& img, int amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-amplitude, amplitude);
  TextureImage out = img;
  for (auto& v : out.data()) v = clamp_to_u8(v + d(rng));
  return out;
}

ColoredPointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  std::uniform_int_distribution<int> C(0, 255);
  ColoredPointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    // Points near a wavy sheet so plane fits are meaningful.
    const double x = U(rng), y = U(rng);
    c.points.push_back({x, y, 0.2 * std::sin(3 * x) * std::cos(2 * y) + 0.01 * U(rng)});
    c.colors.push_back({std::uint8_t(C(rng)), std::uint8_t(C(rng)), std::uint8_t(C(rng))});
  }
  return c;
}

ColoredPointCloud jittered(const ColoredPointCloud& c, double amount, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, amount);
  std::uniform_int_distribution<int> d(-20, 20);
  ColoredPointCloud out = c;
  for (auto& p : out.points) p = p + Vec3{n(rng), n(rng), n(rng)};
  for (auto& col : out.colors)
    for (auto& v : col) v = clamp_to_u8(v + d(rng));
  return out;
}

}  // namespace

TEST(Psnr, ClosedForm) {
  TextureImage a(4, 4, Rgb{100, 100, 100});
  TextureImage b(4, 4, Rgb{101, 101, 101});
  EXPECT_NEAR(psnr(a, b), 48.1308, 1e-4);  // MSE 1
  for (auto& v : b.data()) v = 100;
  for (std::size_t i = 0; i < b.data().size(); i += 2) b.data()[i] = 102;  // half the samples off by 2
  EXPECT_NEAR(psnr(a, b), 45.1205, 1e-4);  // MSE 2
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_THROW(psnr(a, TextureImage(4, 5)), InvalidArgument);
}

TEST(Psnr, Oracle) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = dhqa::testing::random_image(23, 17, s), b = perturbed(a, 1 + int(s), s + 100);
    EXPECT_NEAR(psnr(a, b), oracle::psnr(a, b), 1e-9);
  }
}

TEST(Ssim, OracleAndBasics) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = dhqa::testing::structured_image(32, 24, s), b = perturbed(a, 5 + 3 * int(s), s);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-9);
  }
  const auto a = dhqa::testing::structured_image(40, 40, 1);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_LT(ssim(a, perturbed(a, 30, 2)), ssim(a, perturbed(a, 5, 2)));
  EXPECT_THROW(ssim(TextureImage(10, 10), TextureImage(10, 10)), InvalidArgument);
}

TEST(MsSsim, IdentityAndSizeLimit) {
  const auto a = dhqa::testing::structured_image(176, 176, 3);
  EXPECT_NEAR(ms_ssim(a, a), 1.0, 1e-12);
  const double mild = ms_ssim(a, perturbed(a, 5, 1)), strong = ms_ssim(a, perturbed(a, 40, 1));
  EXPECT_LT(strong, mild);
  EXPECT_LT(mild, 1.0);
  EXPECT_THROW(ms_ssim(TextureImage(175, 200), TextureImage(175, 200)), InvalidArgument);
}

TEST(Gmsd, OracleAndShiftInvariance) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = dhqa::testing::structured_image(30 + int(s), 21, s), b = perturbed(a, 4 + 4 * int(s), s);
    EXPECT_NEAR(gmsd(a, b), oracle::gmsd(a, b), 1e-9);
  }
  const auto a = dhqa::testing::structured_image(64, 48, 9);
  EXPECT_EQ(gmsd(a, a), 0.0);
  TextureImage shifted = a;
  for (auto& v : shifted.data()) v = clamp_to_u8(v * 0.8 + 20);  // keep headroom, then shift
  TextureImage base = shifted;
  for (auto& v : shifted.data()) v = static_cast<std::uint8_t>(v + 10);
  EXPECT_LT(gmsd(base, shifted), 0.01);
  EXPECT_GT(gmsd(a, perturbed(a, 40, 1)), 0.05);
}

TEST(PointSampling, AreaWeighted) {
  TexturedMesh m;
  m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {10, 0, 0}, {13, 0, 0}, {10, 2, 0}};  // areas 0.5 and 3
  m.uvs = {{0, 0}, {1, 0}, {0, 1}};
  m.faces = {Face{Corner{0, 0}, Corner{1, 1}, Corner{2, 2}}, Face{Corner{3, 0}, Corner{4, 1}, Corner{5, 2}}};
  m.texture = TextureImage(2, 2, Rgb{9, 8, 7});
  // Rescale the second triangle to area 1.5 so the ratio is 1:3.
  m.positions[5] = {10, 1, 0};
  const auto c = sample_point_cloud(m, 100000, 5);
  std::size_t first = 0;
  for (const auto& p : c.points) first += p.x < 5;
  const double ratio = double(c.size() - first) / first;
  EXPECT_NEAR(ratio, 3.0, 0.15);
  for (const auto& col : c.colors) EXPECT_EQ(col, (Rgb{9, 8, 7}));
  EXPECT_THROW(sample_point_cloud(m, 0, 1), InvalidArgument);
}

TEST(PointSampling, PointsLieOnSurface) {
  const auto head = make_synthetic_head(1, {10, 16, 32, 0.8});
  const auto c = sample_point_cloud(head, 2000, 3);
  EXPECT_EQ(c.size(), 2000u);
  const auto box = bounding_box(head);
  for (const auto& p : c.points)
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(p[a], box.min[a] - 1e-12);
      EXPECT_LE(p[a], box.max[a] + 1e-12);
    }
  EXPECT_EQ(sample_point_cloud(head, 50, 3).points, sample_point_cloud(head, 50, 3).points);
}

TEST(KdTree, MatchesBruteForce) {
  const auto c = random_cloud(700, 1);
  const KdTree tree(c.points);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1.2, 1.2);
  for (int i = 0; i < 300; ++i) {
    const Vec3 q{U(rng), U(rng), U(rng)};
    double d2;
    const auto j = oracle::nearest(c.points, q, &d2);
    const auto nb = tree.nearest(q);
    EXPECT_EQ(nb.index, j);
    EXPECT_EQ(nb.dist2, d2);
    const auto k = tree.knn(q, 12);
    ASSERT_EQ(k.size(), 12u);
    EXPECT_EQ(k.front().index, j);
    for (std::size_t t = 1; t < k.size(); ++t) EXPECT_LE(k[t - 1].dist2, k[t].dist2);
  }
  // Duplicates tie-break on the lower index.
  std::vector<Vec3> dup{{0, 0, 0}, {1, 1, 1}, {1, 1, 1}};
  EXPECT_EQ(KdTree(dup).nearest({1, 1, 1.1}).index, 1u);
}

TEST(PointCloudMetrics, OracleOn500Points) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto ref = random_cloud(500, 10 + s);
    const auto dist = jittered(random_cloud(500, 20 + s), 0.01, s);
    EXPECT_NEAR(p2point_mse(ref, dist), oracle::p2point(ref.points, dist.points), 1e-9);
    EXPECT_NEAR(p2plane_mse(ref, dist), oracle::p2plane(ref.points, dist.points), 1e-9);
    EXPECT_NEAR(psnr_yuv(ref, dist), oracle::psnr_yuv(ref.points, ref.colors, dist.points, dist.colors), 1e-9);
  }
}

TEST(PointCloudMetrics, KnownValues) {
  const auto ref = random_cloud(200, 3);
  EXPECT_EQ(p2point_mse(ref, ref), 0.0);
  EXPECT_EQ(p2plane_mse(ref, ref), 0.0);
  EXPECT_EQ(psnr_yuv(ref, ref), kPsnrCap);

  ColoredPointCloud brighter = ref;
  for (auto& c : brighter.colors)
    for (auto& v : c) v = static_cast<std::uint8_t>(std::min(254, int(v))) + 1;
  ColoredPointCloud base = ref;
  for (auto& c : base.colors)
    for (auto& v : c) v = static_cast<std::uint8_t>(std::min(254, int(v)));
  // +1 on R, G and B is +1 luma with unchanged chroma: MSE = 6/8.
  EXPECT_NEAR(psnr_yuv(base, brighter), 49.38, 0.005);

  ColoredPointCloud shifted = ref;
  for (auto& p : shifted.points) p.z += 0.001;
  EXPECT_LE(p2point_mse(ref, shifted), 1e-6 + 1e-15);
}

TEST(PointCloudMetrics, Errors) {
  const auto small = random_cloud(12, 1);
  EXPECT_THROW(p2plane_mse(small, small), InvalidArgument);
  EXPECT_NO_THROW(p2plane_mse(random_cloud(13, 1), random_cloud(13, 2)));
  ColoredPointCloud bad = small;
  bad.colors.pop_back();
  EXPECT_THROW(p2point_mse(bad, small), InvalidArgument);
  EXPECT_THROW(psnr_yuv(ColoredPointCloud{}, small), InvalidArgument);
}
