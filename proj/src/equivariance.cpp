#include "comir/equivariance.hpp"

#include <cmath>
#include <numbers>
#include <optional>

namespace comir {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
    throw ImageError(std::string(what) + ": images differ in shape");
  }
}

// Quarter-turn index for angles that are (numerically) multiples of 90 degrees.
std::optional<int> quarter_turns(double degrees) {
  const double q = degrees / 90.0;
  const double r = std::round(q);
  if (std::fabs(q - r) < 1e-9) return int(r);
  return std::nullopt;
}

}  // namespace

double image_pearson(const Image& a, const Image& b, const Image* mask) {
  require_same_shape(a, b, "pearson");
  if (!mask) return pearson(a.pixels().data(), b.pixels().data(), std::size_t(a.pixels().size()));
  if (mask->height() != a.height() || mask->width() != a.width()) throw ImageError("pearson: mask shape mismatch");
  std::vector<float> va;
  std::vector<float> vb;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        if (mask->at(0, y, x) == 0.0f) continue;
        va.push_back(a.at(c, y, x));
        vb.push_back(b.at(c, y, x));
      }
    }
  }
  return pearson(va.data(), vb.data(), va.size());
}

Image inscribed_square_mask(int height, int width) {
  Image mask(1, height, width);
  const double radius = (std::min(height, width) - 1) / 2.0;
  const double half = radius / std::numbers::sqrt2;
  const Point2D c = mask.center();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (std::fabs(x - c.x()) <= half && std::fabs(y - c.y()) <= half) mask.at(0, y, x) = 1.0f;
    }
  }
  return mask;
}

Image rotate_content(const Image& img, double angle, Interpolation interp) {
  if (const auto k = quarter_turns(angle * 180.0 / std::numbers::pi)) return rotate_c4(img, C4Element(*k));
  // Content turned by +angle samples the source at R(-angle) p.
  const RigidTransform2D t{-angle, Point2D::Zero(), img.center()};
  Image out = warp(img, t, interp).image;
  out.set_modality(img.modality());
  out.set_value_range(img.value_range());
  return out;
}

EquivarianceCurve equivariance_curve(const ImageModel& model, const Image& img, double step_degrees) {
  if (!img.is_square()) throw ImageError("equivariance curve needs a square image");
  if (!(step_degrees > 0.0)) throw ImageError("angle step must be positive");
  const double steps = 360.0 / step_degrees;
  if (std::fabs(steps - std::round(steps)) > 1e-9) throw ImageError("angle step must divide 360");
  const Image reference = model(img);
  const Image mask = inscribed_square_mask(reference.height(), reference.width());
  EquivarianceCurve curve;
  for (long i = 0; i < std::lround(steps); ++i) {
    const double deg = double(i) * step_degrees;
    const double rad = deg * std::numbers::pi / 180.0;
    const Image back = rotate_content(model(rotate_content(img, rad)), -rad);
    curve.angles.push_back(deg);
    curve.correlations.push_back(image_pearson(back, reference, &mask));
  }
  return curve;
}

CorrelationReport pairwise_correlation_experiment(const std::vector<Image>& comirs, std::uint64_t seed,
                                                  int resamples, double level) {
  if (comirs.size() < 2) throw StatsError("correlation experiment needs at least two representations");
  CorrelationReport report;
  for (std::size_t i = 0; i < comirs.size(); ++i) {
    for (std::size_t j = i + 1; j < comirs.size(); ++j) {
      require_same_shape(comirs[i], comirs[j], "correlation experiment");
      report.values.push_back(image_pearson(comirs[i], comirs[j]));
    }
  }
  report.pairs = report.values.size();
  report.mean = mean(report.values);
  if (report.values.size() == 1) {
    // A single pair carries no resampling variability.
    report.lo = report.hi = report.mean;
    return report;
  }
  const IntervalEstimate ci = bootstrap_ci(report.values, level, resamples, seed);
  report.lo = ci.lo;
  report.hi = ci.hi;
  return report;
}

}  // namespace comir
