#pragma once

// Intensity-based rigid registration with a level-set distance: both images
// are squashed to [0, 1] and quantised, and every sampled point pays the
// spatial distance from its mapped position to the matching level set of the
// other image (or to its complement). The distance is symmetric and is
// minimised coarse to fine by clipped momentum descent on sampled subsets.

#include "comir/registration/common.hpp"

#include <cstdint>

namespace comir {

enum class Squash { logistic, none };

Squash parse_squash(const std::string& name);
std::string to_string(Squash s);

struct IntensityConfig {
  std::vector<int> subsampling{4, 2, 1};
  std::vector<double> sigmas{12.0, 5.0, 1.0};  // full-resolution px, applied before subsampling
  std::vector<int> iterations{3000, 1000, 500};
  std::vector<double> step_sizes{2.0, 2.0, 2.0};
  double final_step = 0.2;  // last level ramps linearly from its step size to this
  double momentum = 0.9;
  double gradient_clip = 1.0;  // per parameter
  int quantization_levels = 7;
  Squash squash = Squash::logistic;
  double sampling_fraction = 0.005;
  int min_samples = 16;  // per direction and step
  std::vector<double> start_rotations{-0.3, 0.0, 0.3};

  void validate() const;
};

/// Deterministic symmetric distance on the finest pyramid level over all its pixels (px).
double intensity_distance(const Image& ref, const Image& flt, const RigidTransform2D& t,
                          const IntensityConfig& cfg);

/// Single run from `init`. Throws RegistrationError when either image is
/// constant after quantisation. `objective` is the final full-resolution distance.
RegistrationResult register_intensity(const Image& ref, const Image& flt, const IntensityConfig& cfg,
                                      std::uint64_t seed, const RigidTransform2D& init = RigidTransform2D{});

/// Exact Euclidean distance transform: distance from every pixel to the
/// nearest pixel with mask != 0; +inf everywhere when the mask is empty.
std::vector<float> euclidean_distance_transform(const std::vector<std::uint8_t>& mask, int height, int width);

}  // namespace comir
