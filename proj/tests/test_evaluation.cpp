#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dhqa/evaluation.hpp"
#include "oracles.hpp"

using namespace dhqa;
using namespace dhqa::eval;

namespace {

/// Small integer-valued vectors so ties are common.
std::vector<double> random_vector(std::size_t n, int levels, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> transform(const std::vector<double>& v, double (*f)(double)) {
  std::vector<double> out;
  for (double x : v) out.push_back(f(x));
  return out;
}

/// Stimuli "c<k>_<j>" of content "c<k>", `per` stimuli each.
struct Dataset {
  std::map<std::string, double> mos;
  std::map<std::string, std::string> content_of;
  std::vector<std::string> contents;
};

Dataset make_dataset(int contents, int per, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 100);
  Dataset d;
  for (int k = 0; k < contents; ++k) {
    const std::string c = "c" + std::to_string(k);
    d.contents.push_back(c);
    for (int j = 0; j < per; ++j) {
      const std::string s = c + "_" + std::to_string(j);
      d.mos[s] = U(rng);
      d.content_of[s] = c;
    }
  }
  return d;
}

}  // namespace

TEST(Ranks, AverageTies) {
  EXPECT_EQ(average_ranks({1, 2, 2, 3}), (std::vector<double>{1, 2.5, 2.5, 4}));
  EXPECT_EQ(average_ranks({5, 5, 5}), (std::vector<double>{2, 2, 2}));
  EXPECT_EQ(average_ranks({3, 1, 2}), (std::vector<double>{3, 1, 2}));
}

TEST(Srcc, Examples) {
  EXPECT_DOUBLE_EQ(srcc({1, 2, 3, 4}, {10, 20, 25, 100}), 1.0);
  EXPECT_DOUBLE_EQ(srcc({1, 2, 3, 4}, {9, 8, 7, -1}), -1.0);
  // Explicit tied ranks {1, 2.5, 2.5, 4} against {1, 2, 3, 4}.
  const double mean = 2.5;
  const std::vector<double> r{1, 2.5, 2.5, 4}, s{1, 2, 3, 4};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (r[i] - mean) * (s[i] - mean);
    sxx += (r[i] - mean) * (r[i] - mean);
    syy += (s[i] - mean) * (s[i] - mean);
  }
  EXPECT_NEAR(srcc({1, 2, 2, 3}, {1, 2, 3, 4}), sxy / std::sqrt(sxx * syy), 1e-12);
  EXPECT_THROW(srcc({1, 1, 1}, {1, 2, 3}), InvalidArgument);
  EXPECT_THROW(srcc({1}, {1}), InvalidArgument);
}

TEST(PlccRmse, Examples) {
  EXPECT_DOUBLE_EQ(plcc({1, 2, 4}, {1, 2, 4}), 1.0);
  EXPECT_NEAR(plcc({1, 2, 4, 7}, {5, 7, 11, 17}), 1.0, 1e-15);
  EXPECT_EQ(rmse({1, 2, 4}, {1, 2, 4}), 0.0);
  EXPECT_DOUBLE_EQ(rmse({0, 0}, {1, 3}), std::sqrt(5.0));
  EXPECT_EQ(rmse({2}, {5}), 3.0);
  EXPECT_THROW(plcc({2, 2}, {1, 3}), InvalidArgument);
  EXPECT_THROW(rmse({}, {}), InvalidArgument);
  EXPECT_THROW(plcc({1, 2}, {1, 2, 3}), InvalidArgument);
}

TEST(Krcc, Examples) {
  EXPECT_NEAR(krcc({1, 2, 3}, {1, 3, 2}), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(krcc({1, 2, 3, 4}, {2, 3, 9, 10}), 1.0);
  // {1,1,2} vs {1,2,3}: 2 concordant, 0 discordant, one pair tied in x only.
  EXPECT_NEAR(krcc({1, 1, 2}, {1, 2, 3}), 2.0 / std::sqrt(2.0 * 3.0), 1e-15);
  EXPECT_THROW(krcc({4, 4, 4}, {1, 2, 3}), InvalidArgument);
}

TEST(Correlations, MatchOraclesOnRandomVectors) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + t % 20;
    auto x = random_vector(n, 2 + t % 7, rng), y = random_vector(n, 3 + t % 5, rng);
    x[0] = 0;
    x[1] = 1;  // never constant
    y[0] = 0;
    y[1] = 2;
    EXPECT_NEAR(srcc(x, y), oracle::srcc(x, y), 1e-9);
    EXPECT_NEAR(plcc(x, y), oracle::plcc(x, y), 1e-9);
    EXPECT_NEAR(krcc(x, y), oracle::krcc(x, y), 1e-9);
    EXPECT_NEAR(rmse(x, y), oracle::rmse(x, y), 1e-9);
  }
}

// Property: rank statistics ignore strictly increasing transforms.
TEST(Correlations, RankStatisticsInvariantUnderMonotoneMaps) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(15), y(15);
    for (auto& v : x) v = std::round(U(rng) * 4) / 4;
    for (auto& v : y) v = U(rng);
    y[0] = x[0] + 10;
    for (auto f : {+[](double v) { return std::exp(v); }, +[](double v) { return v * v * v; },
                   +[](double v) { return 3 * v - 7; }}) {
      EXPECT_NEAR(srcc(transform(x, f), y), srcc(x, y), 1e-12);
      EXPECT_NEAR(krcc(transform(x, f), y), krcc(x, y), 1e-12);
      EXPECT_NEAR(srcc(x, transform(y, f)), srcc(x, y), 1e-12);
      EXPECT_NEAR(krcc(x, transform(y, f)), krcc(x, y), 1e-12);
    }
  }
}

TEST(Logistic, RecoversNoiselessData) {
  const Beta truth{60, 0.8, 5, 0.5, 40};
  std::vector<double> x, y;
  for (int i = 0; i <= 60; ++i) {
    x.push_back(i / 6.0);
    y.push_back(logistic(truth, x.back()));
  }
  const auto fit = logistic_fit(x, y);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(rmse(fit.map(x), y), 1e-6);
}

TEST(Logistic, IdentityAndDecreasing) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 100);
  std::vector<double> mos(40);
  for (auto& v : mos) v = U(rng);
  EXPECT_NEAR(plcc(logistic_fit(mos, mos).map(mos), mos), 1.0, 1e-9);

  // A GMSD-like predictor: lower is better.
  std::vector<double> x;
  for (double m : mos) x.push_back(0.3 * std::exp(-m / 40.0));
  const auto fit = logistic_fit(x, mos);
  std::vector<double> grid;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  for (int i = 0; i <= 50; ++i) grid.push_back(*lo + (*hi - *lo) * i / 50.0);
  const auto mapped = fit.map(grid);
  for (std::size_t i = 1; i < mapped.size(); ++i) EXPECT_LT(mapped[i], mapped[i - 1]);
}

// Property: the fitted map is never worse than the best affine map.
TEST(Logistic, PlccNeverDropsAfterMapping) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0, 1);
  std::uniform_real_distribution<double> U(0, 100);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = U(rng);
      y[i] = (t % 2 ? 1 : -1) * 0.01 * (t + 1) * x[i] * x[i] / 100 + 15 * N(rng);
    }
    const auto fit = logistic_fit(x, y);
    EXPECT_GE(plcc(fit.map(x), y), plcc(x, y) - 1e-9) << t;
  }
}

TEST(Logistic, Errors) {
  EXPECT_THROW(logistic_fit({1, 2, 3, 4}, {1, 2, 3, 4}), InvalidArgument);
  EXPECT_THROW(logistic_fit({1, 1, 1, 1, 1}, {1, 2, 3, 4, 5}), InvalidArgument);
  // Constant MOS is fit exactly by the flat map.
  const auto flat = logistic_fit({1, 2, 3, 4, 5}, {7, 7, 7, 7, 7});
  EXPECT_LT(rmse(flat.map({1, 2, 3, 4, 5}), {7, 7, 7, 7, 7}), 1e-9);
}

TEST(Folds, SizesAndPartition) {
  std::vector<std::string> c55;
  for (int i = 0; i < 55; ++i) c55.push_back("r" + std::to_string(i));
  const auto f55 = make_folds(c55, 5, 1);
  ASSERT_EQ(f55.size(), 5u);
  std::multiset<std::string> all;
  for (const auto& f : f55) {
    EXPECT_EQ(f.test.size(), 11u);
    EXPECT_EQ(f.train.size(), 44u);
    for (const auto& t : f.test) EXPECT_EQ(std::count(f.train.begin(), f.train.end(), t), 0);
    all.insert(f.test.begin(), f.test.end());
  }
  EXPECT_EQ(all, std::multiset<std::string>(c55.begin(), c55.end()));

  const auto f7 = make_folds({"a", "b", "c", "d", "e", "f", "g"}, 5, 9);
  std::vector<std::size_t> sizes;
  for (const auto& f : f7) sizes.push_back(f.test.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1, 1, 1}));

  EXPECT_EQ(make_folds(c55, 5, 1)[2].test, f55[2].test);
  EXPECT_NE(make_folds(c55, 5, 2)[0].test, f55[0].test);
  EXPECT_THROW(make_folds({"a", "b"}, 5, 0), InvalidArgument);
  EXPECT_THROW(make_folds({"a", "a", "b"}, 2, 0), InvalidArgument);
}

TEST(EvaluateMethod, PerfectPredictor) {
  const auto d = make_dataset(10, 6, 5);
  const auto rep = evaluate_method("oracle", d.mos, d.mos, d.content_of, make_folds(d.contents, 5, 0));
  ASSERT_EQ(rep.folds.size(), 5u);
  EXPECT_NEAR(rep.mean.srcc, 1.0, 1e-12);
  EXPECT_NEAR(rep.mean.plcc, 1.0, 1e-9);
  EXPECT_NEAR(rep.mean.krcc, 1.0, 1e-12);
  EXPECT_LT(rep.mean.rmse, 1e-6);
  for (const auto& f : rep.folds) {
    EXPECT_EQ(f.n_test, 12u);
    EXPECT_EQ(f.n_train, 48u);
  }
}

TEST(EvaluateMethod, DecreasingMetricReportsPositiveCorrelation) {
  const auto d = make_dataset(10, 6, 6);
  std::map<std::string, double> inverted;
  for (const auto& [s, m] : d.mos) inverted[s] = 100.0 - m;
  const auto rep = evaluate_method("inv", inverted, d.mos, d.content_of, make_folds(d.contents, 5, 0));
  EXPECT_NEAR(rep.mean.srcc, 1.0, 1e-12);
  EXPECT_NEAR(rep.mean.krcc, 1.0, 1e-12);
  EXPECT_NEAR(rep.mean.plcc, 1.0, 1e-9);
}

TEST(EvaluateMethod, RandomPredictorIsNearZero) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = make_dataset(20, 5, 100 + seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    std::map<std::string, double> scores;
    for (const auto& [s, m] : d.mos) scores[s] = U(rng);
    total += evaluate_method("rnd", scores, d.mos, d.content_of, make_folds(d.contents, 5, seed)).mean.srcc;
  }
  EXPECT_LT(std::abs(total / 20.0), 0.3);
}

// Property: a fold's fit depends on training pairs only.
TEST(EvaluateMethod, TestMosNeverReachesTheFit) {
  const auto d = make_dataset(10, 6, 7);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0, 10);
  std::map<std::string, double> scores;
  for (const auto& [s, m] : d.mos) scores[s] = m + N(rng);
  const auto folds = make_folds(d.contents, 5, 3);
  const auto base = evaluate_method("m", scores, d.mos, d.content_of, folds);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto tampered = d.mos;
    for (auto& [s, m] : tampered)
      if (std::count(folds[f].test.begin(), folds[f].test.end(), d.content_of.at(s))) m = 100 - m;
    const auto rep = evaluate_method("m", scores, tampered, d.content_of, folds);
    EXPECT_EQ(rep.folds[f].beta, base.folds[f].beta);
    EXPECT_NE(rep.folds[f].metrics.srcc, base.folds[f].metrics.srcc);
  }
}

TEST(EvaluateMethod, Errors) {
  const auto d = make_dataset(10, 6, 8);
  const auto folds = make_folds(d.contents, 5, 0);
  auto missing = d.mos;
  missing.erase(missing.begin());
  EXPECT_THROW(evaluate_method("m", missing, d.mos, d.content_of, folds), InvalidArgument);
  EXPECT_THROW(evaluate_method("m", d.mos, missing, d.content_of, folds), InvalidArgument);
  auto overlapping = folds;
  overlapping[0].train.push_back(overlapping[0].test[0]);
  EXPECT_THROW(evaluate_method("m", d.mos, d.mos, d.content_of, overlapping), InvalidArgument);
  EXPECT_THROW(evaluate_method("m", d.mos, d.mos, d.content_of, {}), InvalidArgument);
}

TEST(Report, JsonAndTable) {
  const auto d = make_dataset(10, 6, 9);
  const auto rep = evaluate_method("PSNR", d.mos, d.mos, d.content_of, make_folds(d.contents, 5, 0));
  const auto j = to_json(rep);
  EXPECT_EQ(j["method"], "PSNR");
  EXPECT_EQ(j["folds"].size(), 5u);
  EXPECT_EQ(j["folds"][0]["beta"].size(), 5u);
  EXPECT_NEAR(j["mean"]["srcc"].get<double>(), 1.0, 1e-12);
  const auto table = format_table({rep});
  EXPECT_EQ(table,
            "Method     SRCC     PLCC     KRCC     RMSE\n"
            "PSNR     1.0000   1.0000   1.0000   0.0000\n");
}
