#include "comir/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace comir {

Image::Image(int channels, int height, int width, std::string modality)
    : pixels_(PlaneMatrix::Zero(channels, Eigen::Index(height) * width)),
      height_(height),
      width_(width),
      modality_(std::move(modality)) {
  if (channels < 1 || height < 1 || width < 1) {
    throw ImageError("image dimensions must be positive");
  }
}

Image::Image(PlaneMatrix pixels, int height, int width, std::string modality)
    : pixels_(std::move(pixels)), height_(height), width_(width), modality_(std::move(modality)) {
  if (pixels_.rows() < 1 || height < 1 || width < 1) {
    throw ImageError("image dimensions must be positive");
  }
  if (pixels_.cols() != Eigen::Index(height) * width) {
    throw ImageError("pixel buffer does not match height * width");
  }
}

Image Image::select_channels(std::initializer_list<int> which) const {
  return select_channels(std::vector<int>(which));
}

Image Image::select_channels(const std::vector<int>& which) const {
  PlaneMatrix out(Eigen::Index(which.size()), pixels_.cols());
  for (std::size_t i = 0; i < which.size(); ++i) {
    if (which[i] < 0 || which[i] >= channels()) {
      throw ImageError("channel index " + std::to_string(which[i]) + " out of range");
    }
    out.row(Eigen::Index(i)) = pixels_.row(which[i]);
  }
  Image img(std::move(out), height_, width_, modality_);
  img.set_value_range(range_);
  return img;
}

Interpolation parse_interpolation(const std::string& name) {
  if (name == "nearest") return Interpolation::nearest;
  if (name == "linear") return Interpolation::linear;
  if (name == "cubic") return Interpolation::cubic;
  throw std::invalid_argument("unknown interpolation '" + name + "'");
}

std::string to_string(Interpolation interp) {
  switch (interp) {
    case Interpolation::nearest: return "nearest";
    case Interpolation::linear: return "linear";
    case Interpolation::cubic: return "cubic";
  }
  return "linear";
}

Image rotate_c4(const Image& img, C4Element g) {
  if (g.is_identity()) return img;
  const int h = img.height();
  const int w = img.width();
  const int oh = (g.k() % 2 == 0) ? h : w;
  const int ow = (g.k() % 2 == 0) ? w : h;
  Image out(img.channels(), oh, ow, img.modality());
  out.set_value_range(img.value_range());
  for (int c = 0; c < img.channels(); ++c) {
    for (int yo = 0; yo < oh; ++yo) {
      for (int xo = 0; xo < ow; ++xo) {
        int xs = 0;
        int ys = 0;
        switch (g.k()) {
          case 1: xs = yo; ys = h - 1 - xo; break;
          case 2: xs = w - 1 - xo; ys = h - 1 - yo; break;
          default: xs = w - 1 - yo; ys = xo; break;
        }
        out.at(c, yo, xo) = img.at(c, ys, xs);
      }
    }
  }
  return out;
}

Image rotate_c4_shape_preserving(const Image& img, C4Element g) {
  if (g.k() % 2 == 1 && !img.is_square()) {
    throw ImageError("odd quarter turn of a non-square " + std::to_string(img.height()) + "x" +
                     std::to_string(img.width()) + " image would change its shape");
  }
  return rotate_c4(img, g);
}

namespace {

constexpr double kSupportTolerance = 1e-6;

float cubic_weight(double t) {
  // Catmull-Rom (a = -0.5).
  t = std::abs(t);
  if (t < 1.0) return static_cast<float>((1.5 * t - 2.5) * t * t + 1.0);
  if (t < 2.0) return static_cast<float>(((-0.5 * t + 2.5) * t - 4.0) * t + 2.0);
  return 0.0f;
}

}  // namespace

bool sample(const Image& img, int c, double x, double y, Interpolation interp, float& value) {
  const int w = img.width();
  const int h = img.height();
  switch (interp) {
    case Interpolation::nearest: {
      const double xr = std::floor(x + 0.5);
      const double yr = std::floor(y + 0.5);
      if (xr < 0 || yr < 0 || xr > w - 1 || yr > h - 1) return false;
      value = img.at(c, int(yr), int(xr));
      return true;
    }
    case Interpolation::linear:
    case Interpolation::cubic: {
      if (x < -kSupportTolerance || y < -kSupportTolerance || x > w - 1 + kSupportTolerance ||
          y > h - 1 + kSupportTolerance) {
        return false;
      }
      x = std::clamp(x, 0.0, double(w - 1));
      y = std::clamp(y, 0.0, double(h - 1));
      const int x0 = std::min(int(std::floor(x)), std::max(w - 2, 0));
      const int y0 = std::min(int(std::floor(y)), std::max(h - 2, 0));
      const double fx = x - x0;
      const double fy = y - y0;
      if (interp == Interpolation::linear) {
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        const double top = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
        const double bot = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
        value = static_cast<float>(top * (1.0 - fy) + bot * fy);
        return true;
      }
      std::array<float, 4> wx{};
      std::array<float, 4> wy{};
      for (int i = 0; i < 4; ++i) {
        wx[i] = cubic_weight(fx - (i - 1));
        wy[i] = cubic_weight(fy - (i - 1));
      }
      double acc = 0.0;
      for (int j = 0; j < 4; ++j) {
        const int yy = std::clamp(y0 + j - 1, 0, h - 1);
        double row = 0.0;
        for (int i = 0; i < 4; ++i) {
          const int xx = std::clamp(x0 + i - 1, 0, w - 1);
          row += wx[i] * img.at(c, yy, xx);
        }
        acc += wy[j] * row;
      }
      value = static_cast<float>(acc);
      return true;
    }
  }
  return false;
}

WarpResult warp(const Image& img, const RigidTransform2D& t, Interpolation interp, int out_height,
                int out_width) {
  WarpResult result{Image(img.channels(), out_height, out_width, img.modality()), 0.0};
  result.image.set_value_range(img.value_range());
  const Eigen::Matrix2d r = t.rotation();
  const Point2D b = t.offset();
  Eigen::Index outside = 0;
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const double sx = r(0, 0) * x + r(0, 1) * y + b.x();
      const double sy = r(1, 0) * x + r(1, 1) * y + b.y();
      bool inside = true;
      for (int c = 0; c < img.channels(); ++c) {
        float v = 0.0f;
        if (!sample(img, c, sx, sy, interp, v)) {
          inside = false;
          v = 0.0f;
        }
        result.image.at(c, y, x) = v;
      }
      if (!inside) ++outside;
    }
  }
  result.out_of_support_fraction = double(outside) / double(Eigen::Index(out_height) * out_width);
  return result;
}

WarpResult warp(const Image& img, const RigidTransform2D& t, Interpolation interp) {
  return warp(img, t, interp, img.height(), img.width());
}

Image crop(const Image& img, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || height < 1 || width < 1 || y0 + height > img.height() ||
      x0 + width > img.width()) {
    throw ImageError("crop window exceeds the image bounds");
  }
  Image out(img.channels(), height, width, img.modality());
  out.set_value_range(img.value_range());
  for (int c = 0; c < img.channels(); ++c) {
    out.plane(c) = img.plane(c).block(y0, x0, height, width);
  }
  return out;
}

Image center_crop(const Image& img, int height, int width) {
  return crop(img, (img.height() - height) / 2, (img.width() - width) / 2, height, width);
}

}  // namespace comir
