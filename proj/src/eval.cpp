#include "comir/eval.hpp"

#include "comir/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace comir {

std::string to_string(Stratum s) {
  switch (s) {
    case Stratum::small:
      return "small";
    case Stratum::medium:
      return "medium";
    case Stratum::large:
      return "large";
  }
  return "small";
}

Stratum parse_stratum(const std::string& name) {
  if (name == "small") return Stratum::small;
  if (name == "medium") return Stratum::medium;
  if (name == "large") return Stratum::large;
  throw EvalError("unknown stratum '" + name + "'");
}

EvalProtocol EvalProtocol::scaled_to(double new_side) const {
  if (!(new_side > 0.0)) throw EvalError("protocol side must be positive");
  const double f = new_side / side;
  EvalProtocol out = *this;
  out.side = new_side;
  out.max_translation *= f;
  out.small_limit *= f;
  out.medium_limit *= f;
  out.failure_threshold *= f;
  return out;
}

Stratum EvalProtocol::classify(double displacement) const {
  if (displacement <= small_limit) return Stratum::small;
  if (displacement <= medium_limit) return Stratum::medium;
  return Stratum::large;
}

void EvalProtocol::validate() const {
  if (!(side > 0.0)) throw EvalError("eval.side must be positive");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 180.0)) throw EvalError("eval.max_rotation_deg must be in [0, 180]");
  if (!(max_translation >= 0.0)) throw EvalError("eval.max_translation must be >= 0");
  if (!(small_limit > 0.0 && medium_limit > small_limit)) {
    throw EvalError("eval strata limits must satisfy 0 < small_limit < medium_limit");
  }
  if (!(failure_threshold > 0.0)) throw EvalError("eval.failure_threshold must be positive");
}

std::vector<Point2D> image_corners(int height, int width) {
  const double x1 = width - 1;
  const double y1 = height - 1;
  return {Point2D(0, 0), Point2D(x1, 0), Point2D(x1, y1), Point2D(0, y1)};
}

double registration_error(const RigidTransform2D& t_true, const RigidTransform2D& t_est, int height, int width) {
  double sum = 0.0;
  for (const Point2D& c : image_corners(height, width)) sum += (apply_rigid(t_true, c) - apply_rigid(t_est, c)).norm();
  return sum / 4.0;
}

std::vector<EvalTransform> generate_eval_transforms(int n_total, const StrataCounts& quotas, std::uint64_t seed,
                                                    int height, int width, const EvalProtocol& protocol,
                                                    long max_draws) {
  protocol.validate();
  if (quotas.small < 0 || quotas.medium < 0 || quotas.large < 0) throw EvalError("stratum quotas must be >= 0");
  if (quotas.total() != n_total) throw EvalError("stratum quotas do not add up to the requested total");
  if (height < 1 || width < 1) throw EvalError("image size must be positive");
  if (n_total == 0) return {};

  // Upper bound on the mean corner displacement reachable under the ranges.
  const double radius = 0.5 * std::hypot(double(width - 1), double(height - 1));
  const double max_rot = protocol.max_rotation_deg * std::numbers::pi / 180.0;
  const double bound = 2.0 * radius * std::sin(0.5 * max_rot) + std::numbers::sqrt2 * protocol.max_translation;
  if (quotas.large > 0 && bound <= protocol.medium_limit) {
    throw EvalError("stratum 'large' is unreachable for a " + std::to_string(width) + "x" + std::to_string(height) +
                    " image under the transform ranges");
  }
  if (quotas.medium > 0 && bound <= protocol.small_limit) {
    throw EvalError("stratum 'medium' is unreachable for a " + std::to_string(width) + "x" +
                    std::to_string(height) + " image under the transform ranges");
  }

  const Point2D center((width - 1) / 2.0, (height - 1) / 2.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rot(-max_rot, max_rot);
  std::uniform_real_distribution<double> tr(-protocol.max_translation, protocol.max_translation);
  std::vector<EvalTransform> buckets[3];
  const int want[3] = {quotas.small, quotas.medium, quotas.large};
  long draws = 0;
  auto done = [&] {
    for (int s = 0; s < 3; ++s) {
      if (int(buckets[s].size()) < want[s]) return false;
    }
    return true;
  };
  while (!done()) {
    if (++draws > max_draws) throw EvalError("stratum quotas not met within the draw budget");
    EvalTransform et;
    et.transform.angle = rot(rng);
    et.transform.translation.x() = tr(rng);
    et.transform.translation.y() = tr(rng);
    et.transform.center = center;
    et.displacement = registration_error(RigidTransform2D::identity(center), et.transform, height, width);
    et.stratum = protocol.classify(et.displacement);
    auto& bucket = buckets[int(et.stratum)];
    if (int(bucket.size()) < want[int(et.stratum)]) bucket.push_back(et);
  }
  std::vector<EvalTransform> out;
  for (auto& b : buckets) out.insert(out.end(), b.begin(), b.end());
  return out;
}

double ECDFCurve::fraction_below(double x) const {
  if (errors.empty()) return 0.0;
  const auto it = std::lower_bound(errors.begin(), errors.end(), x);
  return double(it - errors.begin()) / double(errors.size());
}

ECDFCurve ecdf(const std::vector<double>& errors, double threshold, double scale) {
  if (errors.empty()) throw EvalError("ecdf of an empty error list");
  if (!(scale > 0.0)) throw EvalError("ecdf scale must be positive");
  for (const double e : errors) {
    if (std::isnan(e) || e < 0.0) throw EvalError("registration errors must be >= 0 (failures are +inf)");
  }
  ECDFCurve c;
  c.errors = errors;
  std::sort(c.errors.begin(), c.errors.end());
  c.fractions.resize(c.errors.size());
  for (std::size_t i = 0; i < c.errors.size(); ++i) c.fractions[i] = double(i + 1) / double(c.errors.size());
  c.threshold = threshold;
  c.scale = scale;
  c.success_fraction = c.fraction_below(threshold);
  return c;
}

SuccessCounts success_counts(const std::vector<double>& errors, int side, double absolute_threshold) {
  if (side < 1) throw EvalError("image side must be positive");
  SuccessCounts s;
  s.trials = int(errors.size());
  // Integer arithmetic avoids 0.01 * 800 landing a hair above 8.
  s.threshold_1pct = int((side + 99) / 100);
  s.threshold_5pct = int((5 * side + 99) / 100);
  s.threshold_abs = absolute_threshold;
  for (const double e : errors) {
    if (std::isnan(e)) throw EvalError("registration error is NaN");
    s.below_1pct += e < s.threshold_1pct;
    s.below_5pct += e < s.threshold_5pct;
    s.below_abs += e < absolute_threshold;
  }
  return s;
}

std::vector<TimingRow> timing_report(const std::vector<TimingEntry>& log) {
  std::vector<TimingRow> rows;
  std::vector<std::vector<std::string>> items;
  for (const TimingEntry& e : log) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const TimingRow& r) { return r.stage == e.stage; });
    if (it == rows.end()) {
      rows.push_back({e.stage, 0.0, 0, 0.0});
      items.emplace_back();
      it = rows.end() - 1;
    }
    const std::size_t k = std::size_t(it - rows.begin());
    it->total_seconds += e.seconds;
    if (std::find(items[k].begin(), items[k].end(), e.item) == items[k].end()) items[k].push_back(e.item);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].items = int(items[k].size());
    rows[k].seconds_per_item = rows[k].items > 0 ? rows[k].total_seconds / rows[k].items : 0.0;
  }
  return rows;
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << "stage,total_seconds,items,seconds_per_item\n";
  for (const TimingRow& r : rows) {
    os << r.stage << ',' << r.total_seconds << ',' << r.items << ',' << r.seconds_per_item << '\n';
  }
  return os.str();
}

EvalPair make_eval_pair(const Image& source, const RigidTransform2D& t, int size) {
  return make_eval_pair(source, source, t, size);
}

EvalPair make_eval_pair(const Image& ref_source, const Image& flt_source, const RigidTransform2D& t, int size) {
  if (ref_source.height() != flt_source.height() || ref_source.width() != flt_source.width()) {
    throw EvalError("pair sources differ in size");
  }
  if (size < 1 || size > ref_source.height() || size > ref_source.width()) {
    throw EvalError("pair size exceeds the source image");
  }
  const int y0 = (ref_source.height() - size) / 2;
  const int x0 = (ref_source.width() - size) / 2;
  EvalPair pair;
  pair.reference = crop(ref_source, y0, x0, size, size);
  // Output pixel q samples the source at t^-1(q) shifted into crop coordinates.
  RigidTransform2D back = invert(t.about(pair.reference.center()));
  back.translation += Point2D(x0, y0);
  WarpResult w = warp(flt_source, back, Interpolation::linear, size, size);
  if (w.out_of_support_fraction > 0.0) throw EvalError("pair source too small for the transform");
  pair.floating = std::move(w.image);
  pair.floating.set_modality(flt_source.modality());
  pair.floating.set_value_range(flt_source.value_range());
  return pair;
}

}  // namespace comir
