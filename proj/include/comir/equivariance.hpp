#pragma once

#include "comir/image.hpp"
#include "comir/stats.hpp"

#include <functional>
#include <vector>

namespace comir {

using ImageModel = std::function<Image(const Image&)>;

struct EquivarianceCurve {
  std::vector<double> angles;        // degrees in [0, 360), strictly increasing
  std::vector<double> correlations;  // Pearson against the unrotated output
};

struct CorrelationReport {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t pairs = 0;
  std::vector<double> values;  // one correlation per unordered pair
};

/// Pearson over all channels of two equally shaped images, optionally only
/// where `mask` (single channel, non-zero = keep) is set.
double image_pearson(const Image& a, const Image& b, const Image* mask = nullptr);

/// 1 inside the centred square inscribed in the image's inscribed disc.
Image inscribed_square_mask(int height, int width);

/// Rotates the input by each angle about its centre, runs the model, turns the
/// output back and correlates it with the output for the unrotated input.
/// Multiples of 90 degrees use exact pixel permutations, other angles bilinear
/// warps; every angle is compared on the inscribed-square mask.
EquivarianceCurve equivariance_curve(const ImageModel& model, const Image& img, double step_degrees);

/// Mean pairwise Pearson over all unordered pairs of representations (raw
/// channels, no permutation matching) with an empirical bootstrap CI.
CorrelationReport pairwise_correlation_experiment(const std::vector<Image>& comirs, std::uint64_t seed,
                                                  int resamples = 10000, double level = 0.95);

/// Content rotation by an arbitrary angle (radians) about the image centre,
/// matching rotate_c4 at quarter turns.
Image rotate_content(const Image& img, double angle, Interpolation interp = Interpolation::linear);

}  // namespace comir
