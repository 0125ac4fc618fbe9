#include "comir/stats.hpp"

#include <boost/math/distributions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace comir {

BinomialInterval clopper_pearson(long long k, long long n, double level) {
  if (n < 1) throw StatsError("clopper_pearson: n must be >= 1");
  if (k < 0 || k > n) throw StatsError("clopper_pearson: k must be in [0, n]");
  if (!(level > 0.0 && level < 1.0)) throw StatsError("clopper_pearson: level must be in (0, 1)");
  const double alpha = 1.0 - level;
  BinomialInterval out;
  out.method = "clopper_pearson";
  out.level = level;
  out.successes = k;
  out.trials = n;
  out.point = double(k) / double(n);
  out.lo = k == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(double(k), double(n - k + 1)), alpha / 2);
  out.hi = k == n ? 1.0
                  : boost::math::quantile(boost::math::beta_distribution<>(double(k + 1), double(n - k)), 1 - alpha / 2);
  out.count_lo = std::llround(out.lo * double(n));
  out.count_hi = std::llround(out.hi * double(n));
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw StatsError("wilcoxon: paired samples differ in length");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // Two failures (+inf each) are a tie, not an undefined difference.
    if (std::isinf(a[i]) && a[i] == b[i]) continue;
    const double d = a[i] - b[i];
    if (std::isnan(d)) throw StatsError("wilcoxon: NaN difference");
    if (d != 0.0) diff.push_back(d);
  }
  if (diff.empty()) throw StatsError("wilcoxon: all differences are zero; the test is undefined");
  const int n = int(diff.size());
  if (n < kWilcoxonMinPairs) {
    throw StatsError("wilcoxon: need at least " + std::to_string(kWilcoxonMinPairs) +
                     " non-zero differences, got " + std::to_string(n));
  }
  std::vector<double> mags(diff.size());
  std::transform(diff.begin(), diff.end(), mags.begin(), [](double d) { return std::fabs(d); });
  const std::vector<double> ranks = average_ranks(mags);
  double w_plus = 0.0;
  for (int i = 0; i < n; ++i) {
    if (diff[std::size_t(i)] > 0) w_plus += ranks[std::size_t(i)];
  }

  if (n <= kWilcoxonExactLimit) {
    // Average ranks are multiples of 1/2; count sign assignments on doubled ranks.
    std::vector<int> r2(static_cast<std::size_t>(n));
    int total = 0;
    for (int i = 0; i < n; ++i) {
      r2[std::size_t(i)] = int(std::lround(2.0 * ranks[std::size_t(i)]));
      total += r2[std::size_t(i)];
    }
    std::vector<double> count(std::size_t(total + 1), 0.0);
    count[0] = 1.0;
    for (int r : r2) {
      for (int s = total; s >= r; --s) count[std::size_t(s)] += count[std::size_t(s - r)];
    }
    const double all = std::ldexp(1.0, n);
    const int w2 = int(std::lround(2.0 * w_plus));
    double lower = 0.0;
    double upper = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w2) lower += count[std::size_t(s)];
      if (s >= w2) upper += count[std::size_t(s)];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
  }

  const double mu = double(n) * (n + 1) / 4.0;
  double var = double(n) * (n + 1) * (2.0 * n + 1) / 24.0;
  // Tie correction: subtract sum(t^3 - t) / 48 over tie groups.
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = double(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) throw StatsError("wilcoxon: degenerate variance");
  const double z = (w_plus - mu) / std::sqrt(var);
  return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw StatsError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw StatsError("quantile of an empty sample");
  const double pos = std::clamp(q, 0.0, 1.0) * double(sorted.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

IntervalEstimate bootstrap_ci(const std::vector<double>& values, double level, int resamples, std::uint64_t seed) {
  if (values.size() < 2) throw StatsError("bootstrap: need at least two values");
  if (resamples < 1000) throw StatsError("bootstrap: need at least 1000 resamples");
  if (!(level > 0.0 && level < 1.0)) throw StatsError("bootstrap: level must be in (0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(std::size_t(resamples), 0.0);
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    m = s / double(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  IntervalEstimate out;
  out.method = "bootstrap";
  out.level = level;
  out.point = mean(values);
  out.lo = 2.0 * out.point - quantile_sorted(means, 1.0 - alpha / 2);
  out.hi = 2.0 * out.point - quantile_sorted(means, alpha / 2);
  // Guard the lo <= point <= hi contract against rounding for constant data.
  out.lo = std::min(out.lo, out.point);
  out.hi = std::max(out.hi, out.point);
  return out;
}

double pearson(const float* a, const float* b, std::size_t n) {
  if (n < 2) throw StatsError("pearson: need at least two values");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw StatsError("pearson: constant input has no variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw StatsError("pearson: inputs differ in length");
  if (a.size() < 2) throw StatsError("pearson: need at least two values");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw StatsError("pearson: constant input has no variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

}  // namespace comir
