#pragma once

// Scale-invariant keypoints (difference-of-Gaussians extrema with oriented
// gradient-histogram descriptors) and ratio-test matching.

#include "comir/registration/common.hpp"
#include "comir/registration/rigid_fit.hpp"

#include <utility>

namespace comir {

struct FeatureConfig {
  int descriptor_grid = 4;    // samples per descriptor row/column
  int orientation_bins = 8;   // per local histogram
  int min_octave_size = 128;  // px
  int max_octave_size = 1024;
  int steps_per_octave = 3;
  double initial_sigma = 1.6;
  double contrast_threshold = 0.03;  // on [0, 1] intensities, divided by steps_per_octave
  double edge_ratio = 10.0;
  double ratio_test = 0.8;  // nearest / second-nearest descriptor distance
  int min_keypoints = 4;
  RansacConfig ransac{};

  void validate() const;
};

struct Keypoint {
  Point2D position;  // input-image px
  double sigma = 0.0;  // input-image px
  double orientation = 0.0;  // radians, atan2(dy, dx) in raster coordinates
  int octave = 0;
  double response = 0.0;
};

using DescriptorMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  DescriptorMatrix descriptors;  // one row per keypoint
};

FeatureSet detect_features(const Image& img, const FeatureConfig& cfg);

/// (index in a, index in b) for every descriptor of `a` whose nearest neighbour
/// in `b` passes the ratio test.
std::vector<std::pair<int, int>> match_features(const FeatureSet& a, const FeatureSet& b, double ratio);

}  // namespace comir
