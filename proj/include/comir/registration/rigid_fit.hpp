#pragma once

#include "comir/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace comir {

/// Exact rigid motion q = T(p) from two correspondences; nullopt when the two
/// reference points coincide. The result is expressed about `pivot`.
std::optional<RigidTransform2D> rigid_from_two_pairs(const Point2D& p1, const Point2D& p2, const Point2D& q1,
                                                     const Point2D& q2, const Point2D& pivot);

/// Least-squares rigid fit (no scale) of q ~ T(p), expressed about `pivot`.
RigidTransform2D fit_rigid_least_squares(const std::vector<Point2D>& p, const std::vector<Point2D>& q,
                                         const Point2D& pivot);

struct RansacConfig {
  double threshold = 3.0;  // px
  int iterations = 2000;
  int min_inliers = 4;
};

struct RansacResult {
  RigidTransform2D transform;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

/// Consensus over 2-point minimal samples, then least-squares refinement on
/// the inliers (re-scored once). nullopt when fewer than min_inliers agree.
std::optional<RansacResult> ransac_rigid(const std::vector<Point2D>& p, const std::vector<Point2D>& q,
                                         const Point2D& pivot, const RansacConfig& cfg, std::uint64_t seed);

}  // namespace comir
