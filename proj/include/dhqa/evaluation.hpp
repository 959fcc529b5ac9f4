#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dhqa/common.hpp"

namespace dhqa::eval {

namespace detail {

inline void check_pair(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_n, const char* what) {
  if (x.size() != y.size()) throw InvalidArgument(std::string(what) + ": length mismatch");
  if (x.size() < min_n) throw InvalidArgument(std::string(what) + ": needs at least " + std::to_string(min_n) + " values");
}

inline double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace detail

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
    i = j + 1;
  }
  return r;
}

inline double plcc(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_pair(x, y, 2, "plcc");
  const double mx = detail::mean(x), my = detail::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("plcc: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double srcc(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_pair(x, y, 2, "srcc");
  try {
    return plcc(average_ranks(x), average_ranks(y));
  } catch (const InvalidArgument&) {
    throw InvalidArgument("srcc: constant input");
  }
}

/// Kendall tau-b by pair enumeration.
inline double krcc(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_pair(x, y, 2, "krcc");
  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, pairs = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++pairs;
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0) ++tied_x;
      if (dy == 0.0) ++tied_y;
      if (dx == 0.0 || dy == 0.0) continue;
      ((dx > 0) == (dy > 0) ? concordant : discordant)++;
    }
  const double denom = std::sqrt(static_cast<double>(pairs - tied_x) * static_cast<double>(pairs - tied_y));
  if (denom == 0.0) throw InvalidArgument("krcc: all values tied");
  return static_cast<double>(concordant - discordant) / denom;
}

inline double rmse(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_pair(x, y, 1, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

// ---- five-parameter logistic ----

using Beta = std::array<double, 5>;

/// b1 * (1/2 - 1/(1 + exp(b2 (x - b3)))) + b4 x + b5
inline double logistic(const Beta& b, double x) {
  return b[0] * (0.5 - 1.0 / (1.0 + std::exp(b[1] * (x - b[2])))) + b[3] * x + b[4];
}

struct LogisticFit {
  Beta beta{};
  bool converged = false;
  int iterations = 0;
  double sse = 0.0;

  double operator()(double x) const { return logistic(beta, x); }
  std::vector<double> map(const std::vector<double>& xs) const {
    std::vector<double> out;
    for (double x : xs) out.push_back(logistic(beta, x));
    return out;
  }
};

struct LogisticOptions {
  int max_iterations = 500;
  double tolerance = 1e-10;  ///< on the step relative to the parameter norm
};

namespace detail {

inline double sse(const Beta& b, const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = logistic(b, x[i]) - y[i];
    s += r * r;
  }
  return s;
}

/// Levenberg-Marquardt with Marquardt's diagonal scaling.
inline LogisticFit levenberg_marquardt(Beta b, const std::vector<double>& x, const std::vector<double>& y,
                                       const LogisticOptions& opt) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  LogisticFit fit;
  double cost = sse(b, x, y), lambda = 1e-3;
  Eigen::MatrixXd J(n, 5);
  Eigen::VectorXd r(n);
  for (fit.iterations = 0; fit.iterations < opt.max_iterations; ++fit.iterations) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      const double s = 1.0 / (1.0 + std::exp(b[1] * (xi - b[2])));
      const double ds = s * (1.0 - s);
      J(i, 0) = 0.5 - s;
      J(i, 1) = b[0] * ds * (xi - b[2]);
      J(i, 2) = -b[0] * ds * b[1];
      J(i, 3) = xi;
      J(i, 4) = 1.0;
      r(i) = logistic(b, xi) - y[static_cast<std::size_t>(i)];
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    while (lambda < 1e20) {
      Eigen::MatrixXd M = A;
      for (int k = 0; k < 5; ++k) M(k, k) += lambda * std::max(A(k, k), 1e-12);
      const Eigen::VectorXd step = M.ldlt().solve(-g);
      Beta nb = b;
      for (int k = 0; k < 5; ++k) nb[k] += step(k);
      const double nc = sse(nb, x, y);
      if (std::isfinite(nc) && nc < cost) {
        double bn = 0.0;
        for (double v : b) bn += v * v;
        b = nb;
        cost = nc;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (step.norm() <= opt.tolerance * (std::sqrt(bn) + opt.tolerance)) fit.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    // No downhill step at any damping: a stationary point for this precision.
    if (!improved) fit.converged = true;
    if (fit.converged) break;
  }
  fit.beta = b;
  fit.sse = cost;
  return fit;
}

}  // namespace detail

/// Least-squares five-parameter logistic fit. Two starts are run and the
/// lower-SSE result kept: the standard initialisation (b1 = range of y,
/// b2 = +/-4/std(x) oriented by rank correlation, b3 = mean x, b4 = 0,
/// b5 = mean y) and the least-squares line (b1 = 0). The second start makes
/// the fit never worse than the best affine map.
inline LogisticFit logistic_fit(const std::vector<double>& x, const std::vector<double>& y, const LogisticOptions& opt = {}) {
  detail::check_pair(x, y, 5, "logistic_fit");
  const double mx = detail::mean(x), my = detail::mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("logistic_fit: constant predictor");
  const double sd = std::sqrt(sxx / static_cast<double>(x.size() - 1));
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  double orientation = 1.0;
  try {
    orientation = srcc(x, y) < 0.0 ? -1.0 : 1.0;
  } catch (const InvalidArgument&) {
    // constant y: either orientation fits equally well
  }
  const Beta standard{*hi - *lo, orientation * 4.0 / sd, mx, 0.0, my};
  const double slope = sxy / sxx;
  const Beta affine{0.0, orientation * 4.0 / sd, mx, slope, my - slope * mx};
  const auto a = detail::levenberg_marquardt(standard, x, y, opt);
  const auto b = detail::levenberg_marquardt(affine, x, y, opt);
  return b.sse < a.sse ? b : a;
}

// ---- cross-validation ----

struct FoldSplit {
  int index = 0;
  std::vector<std::string> train;  ///< content ids
  std::vector<std::string> test;
};

/// Shuffles the contents with `seed` and cuts them into k near-equal groups;
/// the first (n mod k) groups get the extra element. Fold i tests group i.
inline std::vector<FoldSplit> make_folds(std::vector<std::string> contents, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("make_folds: k must be at least 2");
  std::sort(contents.begin(), contents.end());
  if (std::adjacent_find(contents.begin(), contents.end()) != contents.end())
    throw InvalidArgument("make_folds: duplicate content id");
  if (contents.size() < static_cast<std::size_t>(k))
    throw InvalidArgument("make_folds: " + std::to_string(contents.size()) + " contents cannot fill " + std::to_string(k) +
                          " folds");
  std::mt19937_64 rng(seed);
  std::shuffle(contents.begin(), contents.end(), rng);
  const std::size_t n = contents.size(), base = n / static_cast<std::size_t>(k), extra = n % static_cast<std::size_t>(k);
  std::vector<FoldSplit> folds;
  std::size_t pos = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (int i = 0; i < k; ++i) {
    const std::size_t len = base + (static_cast<std::size_t>(i) < extra ? 1 : 0);
    ranges.emplace_back(pos, pos + len);
    pos += len;
  }
  for (int i = 0; i < k; ++i) {
    FoldSplit f;
    f.index = i;
    for (std::size_t j = 0; j < n; ++j)
      (j >= ranges[i].first && j < ranges[i].second ? f.test : f.train).push_back(contents[j]);
    folds.push_back(std::move(f));
  }
  return folds;
}

struct Metrics {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  double rmse = 0.0;
};

struct FoldResult {
  int index = 0;
  Metrics metrics;
  Beta beta{};
  bool converged = false;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct EvalReport {
  std::string method;
  std::vector<FoldResult> folds;
  Metrics mean;
};

/// Fits the logistic map on a fold's training pairs only.
inline LogisticFit fit_on_train(const std::vector<double>& train_scores, const std::vector<double>& train_mos) {
  return logistic_fit(train_scores, train_mos);
}

/// Per fold: logistic fit on the training stimuli, applied to the test
/// stimuli. PLCC and RMSE use the mapped test scores. SRCC and KRCC use the
/// raw test scores, oriented by the sign of the training-set rank
/// correlation so that decreasing metrics (lower = better) report positive
/// correlations. `scores_by_fold[i]` holds the scores used in fold i, which
/// lets a learned method supply a different model's predictions per fold.
inline EvalReport evaluate_per_fold(const std::string& method,
                                    const std::vector<std::map<std::string, double>>& scores_by_fold,
                                    const std::map<std::string, double>& mos,
                                    const std::map<std::string, std::string>& content_of,
                                    const std::vector<FoldSplit>& folds) {
  if (folds.empty()) throw InvalidArgument("evaluate_method: no folds");
  if (scores_by_fold.size() != folds.size()) throw InvalidArgument("evaluate_method: one score map per fold expected");
  EvalReport rep;
  rep.method = method;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    const auto& fold = folds[fi];
    const auto& scores = scores_by_fold[fi];
    const std::set<std::string> train_c(fold.train.begin(), fold.train.end()), test_c(fold.test.begin(), fold.test.end());
    for (const auto& c : test_c)
      if (train_c.count(c)) throw InvalidArgument("evaluate_method: content " + c + " is in both train and test");
    std::vector<double> xs_train, ys_train, xs_test, ys_test;
    for (const auto& [stimulus, content] : content_of) {
      const bool in_train = train_c.count(content) > 0, in_test = test_c.count(content) > 0;
      if (!in_train && !in_test) continue;
      const auto s = scores.find(stimulus);
      const auto m = mos.find(stimulus);
      if (s == scores.end()) throw InvalidArgument("evaluate_method: no " + method + " score for " + stimulus);
      if (m == mos.end()) throw InvalidArgument("evaluate_method: no MOS for " + stimulus);
      (in_train ? xs_train : xs_test).push_back(s->second);
      (in_train ? ys_train : ys_test).push_back(m->second);
    }
    if (xs_train.size() < 5 || xs_test.size() < 2)
      throw InvalidArgument("evaluate_method: fold " + std::to_string(fold.index) + " is degenerate (" +
                            std::to_string(xs_train.size()) + " train, " + std::to_string(xs_test.size()) + " test)");
    const auto fit = fit_on_train(xs_train, ys_train);
    const double orientation = srcc(xs_train, ys_train) < 0.0 ? -1.0 : 1.0;
    FoldResult r;
    r.index = fold.index;
    r.beta = fit.beta;
    r.converged = fit.converged;
    r.n_train = xs_train.size();
    r.n_test = xs_test.size();
    const auto mapped = fit.map(xs_test);
    r.metrics.srcc = orientation * srcc(xs_test, ys_test);
    r.metrics.krcc = orientation * krcc(xs_test, ys_test);
    r.metrics.plcc = plcc(mapped, ys_test);
    r.metrics.rmse = rmse(mapped, ys_test);
    rep.folds.push_back(r);
  }
  const double k = static_cast<double>(rep.folds.size());
  for (const auto& f : rep.folds) {
    rep.mean.srcc += f.metrics.srcc / k;
    rep.mean.plcc += f.metrics.plcc / k;
    rep.mean.krcc += f.metrics.krcc / k;
    rep.mean.rmse += f.metrics.rmse / k;
  }
  return rep;
}

/// Same scores in every fold, the case for fixed (non-learned) metrics.
inline EvalReport evaluate_method(const std::string& method, const std::map<std::string, double>& scores,
                                  const std::map<std::string, double>& mos,
                                  const std::map<std::string, std::string>& content_of,
                                  const std::vector<FoldSplit>& folds) {
  return evaluate_per_fold(method, std::vector<std::map<std::string, double>>(folds.size(), scores), mos, content_of, folds);
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"srcc", m.srcc}, {"plcc", m.plcc}, {"krcc", m.krcc}, {"rmse", m.rmse}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.index},
                     {"metrics", to_json(f.metrics)},
                     {"beta", f.beta},
                     {"converged", f.converged},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test}});
  return {{"method", r.method}, {"mean", to_json(r.mean)}, {"folds", folds}};
}

/// Aligned text table: one row per report, columns SRCC PLCC KRCC RMSE.
inline std::string format_table(const std::vector<EvalReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.method.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s %8s %8s %8s %8s\n", static_cast<int>(width), "Method", "SRCC", "PLCC", "KRCC", "RMSE");
  out << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s %8.4f %8.4f %8.4f %8.4f\n", static_cast<int>(width), r.method.c_str(), r.mean.srcc,
                  r.mean.plcc, r.mean.krcc, r.mean.rmse);
    out << buf;
  }
  return out.str();
}

}  // namespace dhqa::eval
