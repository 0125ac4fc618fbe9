#pragma once

#include "comir/image.hpp"

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Stratum { small, medium, large };

std::string to_string(Stratum s);
Stratum parse_stratum(const std::string& name);

/// Transform ranges and displacement strata in px for a given image side.
/// The defaults describe 834 px images; scaled_to rescales every px quantity.
struct EvalProtocol {
  double side = 834.0;
  double max_rotation_deg = 30.0;
  double max_translation = 100.0;
  double small_limit = 100.0;   // displacement <= small_limit
  double medium_limit = 200.0;  // small_limit < displacement <= medium_limit
  double failure_threshold = 100.0;

  EvalProtocol scaled_to(double new_side) const;
  Stratum classify(double displacement) const;
  void validate() const;
};

struct StrataCounts {
  int small = 0;
  int medium = 0;
  int large = 0;
  int total() const { return small + medium + large; }
};

struct EvalTransform {
  RigidTransform2D transform;  // reference -> floating, pivot at the image centre
  double displacement = 0.0;   // mean corner displacement against identity
  Stratum stratum = Stratum::small;
};

/// The four pixel-grid corners (0,0), (w-1,0), (w-1,h-1), (0,h-1).
std::vector<Point2D> image_corners(int height, int width);

/// Mean Euclidean distance between t_true(C) and t_est(C) over the four corners.
double registration_error(const RigidTransform2D& t_true, const RigidTransform2D& t_est, int height, int width);

/// Rejection-samples uniform rotations in +-max_rotation and translations in
/// +-max_translation until every stratum quota is met (surplus draws of full
/// strata are discarded). Output order: all small, then medium, then large.
std::vector<EvalTransform> generate_eval_transforms(int n_total, const StrataCounts& quotas, std::uint64_t seed,
                                                    int height, int width, const EvalProtocol& protocol,
                                                    long max_draws = 1000000);

struct ECDFCurve {
  std::vector<double> errors;     // sorted ascending; failures are +inf
  std::vector<double> fractions;  // (i + 1) / N
  double threshold = 100.0;
  double scale = 1.0;  // divide errors by this for relative errors
  double success_fraction = 0.0;  // count(error < threshold) / N

  /// Fraction of errors strictly below x.
  double fraction_below(double x) const;
};

inline constexpr double kFailedRegistration = std::numeric_limits<double>::infinity();

ECDFCurve ecdf(const std::vector<double>& errors, double threshold, double scale = 1.0);

struct SuccessCounts {
  int trials = 0;
  int threshold_1pct = 0;  // px, ceil(1% of side)
  int threshold_5pct = 0;  // px, ceil(5% of side)
  double threshold_abs = 100.0;
  int below_1pct = 0;
  int below_5pct = 0;
  int below_abs = 0;
};

/// Strict "<" counts at the rounded-up 1% and 5% bounds and at the absolute threshold.
SuccessCounts success_counts(const std::vector<double>& errors, int side, double absolute_threshold = 100.0);

struct TimingEntry {
  std::string stage;
  std::string item;
  double seconds = 0.0;
};

struct TimingRow {
  std::string stage;
  double total_seconds = 0.0;
  int items = 0;  // distinct items
  double seconds_per_item = 0.0;
};

/// Per-stage totals in order of first appearance.
std::vector<TimingRow> timing_report(const std::vector<TimingEntry>& log);
std::string timing_csv(const std::vector<TimingRow>& rows);

struct EvalPair {
  Image reference;
  Image floating;
};

/// Reference = centred crop of `source`; floating(q) = source at the crop
/// position of t^-1(q), so that reference(p) == floating(t(p)). Throws when
/// the source is too small to cover every warped pixel.
EvalPair make_eval_pair(const Image& source, const RigidTransform2D& t, int size);

/// Multimodal variant: the reference comes from `ref_source`, the floating
/// image from the aligned `flt_source`.
EvalPair make_eval_pair(const Image& ref_source, const Image& flt_source, const RigidTransform2D& t, int size);

}  // namespace comir
