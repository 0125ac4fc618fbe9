#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct IntervalEstimate {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::string method;
  double level = 0.95;
};

/// Exact binomial interval with counts attached. `count_lo`/`count_hi` are the
/// proportion bounds scaled by n and rounded to the nearest integer, which is
/// how count intervals such as "7 [3; 14]" for 7/134 are usually printed.
struct BinomialInterval : IntervalEstimate {
  long long successes = 0;
  long long trials = 0;
  long long count_lo = 0;
  long long count_hi = 0;
};

BinomialInterval clopper_pearson(long long k, long long n, double level = 0.95);

/// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero differences
/// are dropped; ties share average ranks. Exact null distribution for up to
/// kWilcoxonExactLimit non-zero pairs, else a tie-corrected normal approximation.
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr int kWilcoxonExactLimit = 12;
inline constexpr int kWilcoxonMinPairs = 5;

/// Empirical ("basic") bootstrap interval of the mean: [2m - q_hi, 2m - q_lo]
/// with q the percentiles of resampled means.
IntervalEstimate bootstrap_ci(const std::vector<double>& values, double level, int resamples, std::uint64_t seed);

/// Linear-interpolation quantile of sorted data (q in [0, 1]).
double quantile_sorted(const std::vector<double>& sorted, double q);

double mean(const std::vector<double>& values);

/// Pearson correlation; throws when either input is constant.
double pearson(const float* a, const float* b, std::size_t n);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Ranks with ties averaged, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Spearman rank correlation (Pearson on average ranks).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace comir
