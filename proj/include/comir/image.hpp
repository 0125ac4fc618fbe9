#pragma once

#include "comir/geometry.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <initializer_list>
#include <utility>
#include <vector>

namespace comir {

/// Planar channel storage: one row per channel, pixels in raster order.
using PlaneMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PlaneMap = Eigen::Map<Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstPlaneMap = Eigen::Map<const Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValueRange {
  float lo = 0.0f;
  float hi = 1.0f;
};

/// Multichannel 2-D raster with a modality label.
class Image {
 public:
  Image() = default;
  Image(int channels, int height, int width, std::string modality = {});
  Image(PlaneMatrix pixels, int height, int width, std::string modality = {});

  int channels() const { return static_cast<int>(pixels_.rows()); }
  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index pixel_count() const { return Eigen::Index(height_) * width_; }
  bool empty() const { return pixels_.size() == 0; }
  bool is_square() const { return height_ == width_; }

  float& at(int c, int y, int x) { return pixels_(c, Eigen::Index(y) * width_ + x); }
  float at(int c, int y, int x) const { return pixels_(c, Eigen::Index(y) * width_ + x); }

  PlaneMap plane(int c) { return PlaneMap(pixels_.row(c).data(), height_, width_); }
  ConstPlaneMap plane(int c) const { return ConstPlaneMap(pixels_.row(c).data(), height_, width_); }

  PlaneMatrix& pixels() { return pixels_; }
  const PlaneMatrix& pixels() const { return pixels_; }

  const std::string& modality() const { return modality_; }
  void set_modality(std::string m) { modality_ = std::move(m); }
  ValueRange value_range() const { return range_; }
  void set_value_range(ValueRange r) { range_ = r; }

  /// Geometric center of the pixel grid, ((w-1)/2, (h-1)/2).
  Point2D center() const { return {(width_ - 1) / 2.0, (height_ - 1) / 2.0}; }

  bool all_finite() const { return pixels_.allFinite(); }

  /// Keeps only the listed channels, in the listed order.
  Image select_channels(std::initializer_list<int> which) const;
  Image select_channels(const std::vector<int>& which) const;

  friend bool operator==(const Image& a, const Image& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.pixels_.rows() == b.pixels_.rows() &&
           a.pixels_ == b.pixels_;
  }

 private:
  PlaneMatrix pixels_;
  int height_ = 0;
  int width_ = 0;
  std::string modality_;
  ValueRange range_{};
};

enum class Interpolation { nearest, linear, cubic };

Interpolation parse_interpolation(const std::string& name);
std::string to_string(Interpolation interp);

/// Exact quarter-turn rotation (pixel permutation). The content is turned by
/// g.angle() under the same convention as apply_rigid, so for square images
/// rotate_c4(img, g) == warp(img, rotation by -g.angle() about the center).
/// Odd k swaps height and width.
Image rotate_c4(const Image& img, C4Element g);

/// Same as rotate_c4 but rejects odd turns of non-square images.
Image rotate_c4_shape_preserving(const Image& img, C4Element g);

struct WarpResult {
  Image image;
  double out_of_support_fraction = 0.0;
};

/// Backward warp: out(p) = img(t(p)) for every pixel p of the output grid.
/// Samples falling outside the source are filled with 0 and counted.
WarpResult warp(const Image& img, const RigidTransform2D& t, Interpolation interp, int out_height,
                int out_width);

/// Convenience: same output size as the input.
WarpResult warp(const Image& img, const RigidTransform2D& t, Interpolation interp);

/// Samples channel c at a continuous position. Returns false when outside support.
bool sample(const Image& img, int c, double x, double y, Interpolation interp, float& value);

/// Rectangular crop with top-left corner (x0, y0). Throws when out of bounds.
Image crop(const Image& img, int y0, int x0, int height, int width);

/// Centred crop of the given size.
Image center_crop(const Image& img, int height, int width);

}  // namespace comir
