#include "comir/filters.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace comir {
namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<float> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[std::size_t(i + radius)] = float(v);
    sum += v;
  }
  for (float& v : k) v = float(v / sum);
  return k;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const std::vector<float> k = gaussian_kernel(sigma);
  const int radius = int(k.size() / 2);
  const int h = img.height();
  const int w = img.width();
  Image out(img.channels(), h, w, img.modality());
  out.set_value_range(img.value_range());
  std::vector<float> tmp(std::size_t(h) * w);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i) acc += k[std::size_t(i + radius)] * img.at(c, y, mirror(x + i, w));
        tmp[std::size_t(y) * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[std::size_t(i + radius)] * tmp[std::size_t(mirror(y + i, h)) * w + x];
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

Image gradient_magnitude(const Image& img) {
  const int h = img.height();
  const int w = img.width();
  Image out(img.channels(), h, w, img.modality());
  out.set_value_range(img.value_range());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int xl = std::max(x - 1, 0);
        const int xr = std::min(x + 1, w - 1);
        const int yu = std::max(y - 1, 0);
        const int yd = std::min(y + 1, h - 1);
        const float gx = xr > xl ? (img.at(c, y, xr) - img.at(c, y, xl)) / float(xr - xl) : 0.0f;
        const float gy = yd > yu ? (img.at(c, yd, x) - img.at(c, yu, x)) / float(yd - yu) : 0.0f;
        out.at(c, y, x) = std::sqrt(gx * gx + gy * gy);
      }
    }
  }
  return out;
}

Image subsample(const Image& img, int factor) {
  if (factor <= 1) return img;
  const int h = (img.height() + factor - 1) / factor;
  const int w = (img.width() + factor - 1) / factor;
  Image out(img.channels(), h, w, img.modality());
  out.set_value_range(img.value_range());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y * factor, x * factor);
    }
  }
  return out;
}

Image reflect_pad(const Image& img, int top, int bottom, int left, int right) {
  const int h = img.height() + top + bottom;
  const int w = img.width() + left + right;
  Image out(img.channels(), h, w, img.modality());
  out.set_value_range(img.value_range());
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = mirror(y - top, img.height());
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, sy, mirror(x - left, img.width()));
    }
  }
  return out;
}

Image normalize_minmax(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels(); ++c) {
    auto row = out.pixels().row(c);
    const float lo = row.minCoeff();
    const float hi = row.maxCoeff();
    if (hi > lo) {
      row = (row.array() - lo) / (hi - lo);
    } else {
      row.setZero();
    }
  }
  out.set_value_range({0.0f, 1.0f});
  return out;
}

Image principal_component(const Image& img) {
  if (img.channels() == 1) return normalize_minmax(img);
  const Eigen::MatrixXd data = img.pixels().cast<double>();
  const Eigen::VectorXd mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / double(std::max<Eigen::Index>(1, data.cols() - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd axis = eig.eigenvectors().col(cov.rows() - 1);
  // Fix the sign so the projection correlates positively with the channel mean.
  if (axis.sum() < 0) axis = -axis;
  const Eigen::RowVectorXd projection = axis.transpose() * centered;
  PlaneMatrix out = projection.cast<float>();
  Image result(std::move(out), img.height(), img.width(), img.modality());
  return normalize_minmax(result);
}

Image channel_mean(const Image& img) {
  PlaneMatrix out = img.pixels().colwise().mean();
  Image result(std::move(out), img.height(), img.width(), img.modality());
  result.set_value_range(img.value_range());
  return result;
}

}  // namespace comir
