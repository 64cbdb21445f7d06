#pragma once

// Statistical primitives: percentile bootstrap, two-sample tests and
// ordinary least squares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "misinfo/error.hpp"
#include "misinfo/rng.hpp"

namespace misinfo::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::EmptySelection, "mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

/// Unbiased sample variance (n - 1 denominator).
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / double(xs.size() - 1);
}

/// Linear-interpolated quantile of sorted data (Hyndman-Fan type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptySelection, "quantile of an empty sample");
  const double h = (double(sorted.size()) - 1.0) * q;
  const auto lo = std::size_t(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapOptions {
  int resamples = 10000;
  std::uint64_t seed = 0;
  double level = 0.95;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct Interval {
  double lo = 0;
  double hi = 0;
  double width() const { return hi - lo; }
};

/// Percentile bootstrap interval for the mean. Resamples are drawn in fixed
/// blocks, each with its own stream derived from the seed, so the result
/// does not depend on the thread count.
inline Interval bootstrap_mean_ci(std::span<const double> values,
                                  const BootstrapOptions& opt = {}) {
  if (values.empty()) throw Error(ErrorCode::EmptySelection, "bootstrap of an empty sample");
  if (opt.resamples < 1) throw Error(ErrorCode::InsufficientData, "resamples must be positive");
  constexpr int kBlock = 250;
  const int blocks = (opt.resamples + kBlock - 1) / kBlock;
  const std::size_t n = values.size();
  std::vector<double> stats(std::size_t(opt.resamples));

  auto run_block = [&](int b) {
    Rng rng = Rng::stream(opt.seed, std::uint64_t(b));
    const int begin = b * kBlock;
    const int end = std::min(opt.resamples, begin + kBlock);
    for (int r = begin; r < end; ++r) {
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += values[rng.index(n)];
      stats[std::size_t(r)] = sum / double(n);
    }
  };

  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(blocks));
  if (threads <= 1) {
    for (int b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::future<void>> workers;
    for (unsigned t = 0; t < threads; ++t)
      workers.push_back(std::async(std::launch::async, [&, t] {
        for (int b = int(t); b < blocks; b += int(threads)) run_block(b);
      }));
    for (auto& w : workers) w.get();
  }

  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - opt.level;
  Interval ci{quantile_sorted(stats, alpha / 2), quantile_sorted(stats, 1.0 - alpha / 2)};
  const double point = mean(values);
  ci.lo = std::min(ci.lo, point);
  ci.hi = std::max(ci.hi, point);
  return ci;
}

// ---------------------------------------------------------------------------
// Two-sample tests

struct TTestResult {
  double t = 0;
  double df = 0;
  double p = 1;
};

namespace detail {

inline double two_sided_t_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

inline void require_two_each(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySelection, "empty sample");
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::InsufficientData, "t-test needs at least two values per sample");
}

inline bool all_identical(std::span<const double> a, std::span<const double> b) {
  const double v = a.front();
  auto same = [v](double x) { return x == v; };
  return std::all_of(a.begin(), a.end(), same) && std::all_of(b.begin(), b.end(), same);
}

/// t statistic when both sample variances may vanish.
inline double t_from(double diff, double se) {
  if (se > 0) return diff / se;
  if (diff == 0) return 0.0;
  return diff > 0 ? INFINITY : -INFINITY;
}

}  // namespace detail

/// Two-sided Welch (unequal variance) t-test.
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  detail::require_two_each(a, b);
  const double na = double(a.size()), nb = double(b.size());
  const double va = variance(a) / na, vb = variance(b) / nb;
  TTestResult r;
  r.t = detail::t_from(mean(a) - mean(b), std::sqrt(va + vb));
  const double denom = va * va / (na - 1) + vb * vb / (nb - 1);
  r.df = denom > 0 ? (va + vb) * (va + vb) / denom : na + nb - 2;
  r.p = detail::two_sided_t_p(r.t, r.df);
  return r;
}

/// Two-sided Student (pooled variance) t-test.
inline TTestResult student_t_test(std::span<const double> a, std::span<const double> b) {
  detail::require_two_each(a, b);
  const double na = double(a.size()), nb = double(b.size());
  const double pooled = ((na - 1) * variance(a) + (nb - 1) * variance(b)) / (na + nb - 2);
  TTestResult r;
  r.df = na + nb - 2;
  r.t = detail::t_from(mean(a) - mean(b), std::sqrt(pooled * (1 / na + 1 / nb)));
  r.p = detail::two_sided_t_p(r.t, r.df);
  return r;
}

struct MannWhitneyResult {
  double u = 0;  // U statistic of the first sample
  double p = 1;
  bool exact = false;
};

namespace detail {

/// P(U >= u) under H0 for sample sizes (m, n) without ties, by counting
/// arrangements with the recurrence c(m, n, u) = c(m-1, n, u-n) + c(m, n-1, u).
inline double mann_whitney_exact_sf(int m, int n, int u) {
  const int max_u = m * n;
  if (u <= 0) return 1.0;
  if (u > max_u) return 0.0;
  std::vector<std::vector<std::vector<double>>> f(
      std::size_t(m) + 1, std::vector<std::vector<double>>(std::size_t(n) + 1));
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= n; ++j) {
      auto& cur = f[std::size_t(i)][std::size_t(j)];
      cur.assign(std::size_t(i * j) + 1, 0.0);
      if (i == 0 || j == 0) {
        cur[0] = 1.0;
        continue;
      }
      const auto& a = f[std::size_t(i - 1)][std::size_t(j)];  // largest value in sample 1
      const auto& b = f[std::size_t(i)][std::size_t(j - 1)];  // largest value in sample 2
      for (int k = 0; k <= i * j; ++k) {
        double c = 0;
        if (k - j >= 0 && std::size_t(k - j) < a.size()) c += a[std::size_t(k - j)];
        if (std::size_t(k) < b.size()) c += b[std::size_t(k)];
        cur[std::size_t(k)] = c;
      }
    }
  const auto& dist = f[std::size_t(m)][std::size_t(n)];
  double total = 0, tail = 0;
  for (int k = 0; k <= max_u; ++k) {
    total += dist[std::size_t(k)];
    if (k >= u) tail += dist[std::size_t(k)];
  }
  return tail / total;
}

}  // namespace detail

inline constexpr int kMannWhitneyExactMax = 20;

/// Two-sided Mann-Whitney U test. Exact null distribution when both samples
/// have at most 20 values and there are no ties; otherwise the normal
/// approximation with tie correction and continuity correction.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySelection, "empty sample");
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double x : a) pooled.emplace_back(x, 0);
  for (double x : b) pooled.emplace_back(x, 1);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  double rank_sum_a = 0, tie_term = 0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double t = double(j - i);
    const double avg_rank = (double(i + 1) + double(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 0) rank_sum_a += avg_rank;
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }

  MannWhitneyResult r;
  const double u1 = rank_sum_a - double(n1) * double(n1 + 1) / 2.0;
  const double u2 = double(n1) * double(n2) - u1;
  r.u = u1;
  const double u_big = std::max(u1, u2);

  if (!ties && n1 <= kMannWhitneyExactMax && n2 <= kMannWhitneyExactMax) {
    r.exact = true;
    r.p = std::min(1.0, 2.0 * detail::mann_whitney_exact_sf(int(n1), int(n2), int(u_big)));
    return r;
  }
  const double mu = double(n1) * double(n2) / 2.0;
  const double sigma = std::sqrt(double(n1) * double(n2) / 12.0 *
                                 ((double(n) + 1.0) - tie_term / (double(n) * (double(n) - 1.0))));
  if (sigma == 0) {
    r.p = 1.0;
    return r;
  }
  const double z = (u_big - mu - 0.5) / sigma;
  boost::math::normal std_normal;
  r.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(std_normal, z)), 0.0, 1.0);
  return r;
}

struct SignificanceResult {
  TTestResult t;
  MannWhitneyResult mann_whitney;
  double t_p() const { return t.p; }
  double mannwhitney_p() const { return mann_whitney.p; }
};

/// Welch t-test and Mann-Whitney U on the same pair of samples.
inline SignificanceResult significance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySelection, "empty sample");
  if (detail::all_identical(a, b))
    throw Error(ErrorCode::DegenerateSample, "all values are identical in both samples");
  return {welch_t_test(a, b), mann_whitney_u(a, b)};
}

// ---------------------------------------------------------------------------
// Ordinary least squares

struct RegressionResult {
  double slope = 0;
  double intercept = 0;
  Interval slope_ci;
  Interval intercept_ci;
  double p_value = 1;  // two-sided, H0: slope = 0
  double residual_se = 0;
  std::size_t n = 0;

  // Needed for the confidence band.
  double x_mean = 0;
  double sxx = 0;
  double t_crit = 0;

  /// Confidence band for the mean response at x (same level as slope_ci).
  Interval band_at(double x) const {
    const double fit = intercept + slope * x;
    const double half =
        t_crit * residual_se * std::sqrt(1.0 / double(n) + (x - x_mean) * (x - x_mean) / sxx);
    return {fit - half, fit + half};
  }
};

inline RegressionResult linear_regression(std::span<const double> x, std::span<const double> y,
                                          double level = 0.95) {
  if (x.size() != y.size()) throw Error(ErrorCode::InsufficientData, "x and y differ in length");
  if (x.size() < 3) throw Error(ErrorCode::InsufficientData, "regression needs at least 3 points");
  RegressionResult r;
  r.n = x.size();
  const double nd = double(r.n);
  r.x_mean = mean(x);
  const double y_mean = mean(y);
  double sxy = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    r.sxx += (x[i] - r.x_mean) * (x[i] - r.x_mean);
    sxy += (x[i] - r.x_mean) * (y[i] - y_mean);
  }
  if (r.sxx == 0) throw Error(ErrorCode::InsufficientData, "all x values are equal");
  r.slope = sxy / r.sxx;
  r.intercept = y_mean - r.slope * r.x_mean;
  double sse = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    sse += e * e;
  }
  const double df = nd - 2;
  r.residual_se = std::sqrt(sse / df);
  boost::math::students_t dist(df);
  r.t_crit = boost::math::quantile(dist, 1.0 - (1.0 - level) / 2.0);
  const double se_slope = r.residual_se / std::sqrt(r.sxx);
  const double se_intercept = r.residual_se * std::sqrt(1.0 / nd + r.x_mean * r.x_mean / r.sxx);
  r.slope_ci = {r.slope - r.t_crit * se_slope, r.slope + r.t_crit * se_slope};
  r.intercept_ci = {r.intercept - r.t_crit * se_intercept, r.intercept + r.t_crit * se_intercept};
  r.p_value = detail::two_sided_t_p(detail::t_from(r.slope, se_slope), df);
  return r;
}

}  // namespace misinfo::stats
