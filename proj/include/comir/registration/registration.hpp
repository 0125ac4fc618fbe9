#pragma once

#include "comir/registration/alpha_amd.hpp"
#include "comir/registration/common.hpp"
#include "comir/registration/keypoints.hpp"
#include "comir/registration/mutual_information.hpp"
#include "comir/registration/rigid_fit.hpp"

namespace comir {

/// Keypoints in both images, ratio-test matches, 2-point RANSAC and a rigid
/// least-squares refit on the inliers. Too few keypoints or inliers give
/// success == false with a message instead of a transform.
RegistrationResult register_features(const Image& ref, const Image& flt, const FeatureConfig& cfg,
                                     std::uint64_t seed);

struct MethodConfigs {
  MIConfig mi = MIConfig::desk();
  IntensityConfig intensity{};
  FeatureConfig feature{};
};

/// Runs `method` once from `init` (ignored by the feature method).
RegistrationResult register_once(Method method, const Image& ref, const Image& flt, const MethodConfigs& cfg,
                                 std::uint64_t seed, const RigidTransform2D& init = RigidTransform2D{});

/// Runs the method from every start and keeps the lowest cost() among the
/// successful runs; every start uses the same seed, so a single start equals
/// register_once. Throws RegistrationError when every start fails.
RegistrationResult register_multistart(Method method, const Image& ref, const Image& flt,
                                       const std::vector<RigidTransform2D>& starts, const MethodConfigs& cfg,
                                       std::uint64_t seed);

/// Pure rotations about the reference centre.
std::vector<RigidTransform2D> rotation_starts(const Image& ref, const std::vector<double>& angles);

}  // namespace comir
