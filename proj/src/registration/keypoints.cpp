#include "comir/registration/keypoints.hpp"

#include "comir/filters.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace comir {

namespace {

constexpr double kInputBlur = 0.5;
constexpr int kOrientationHistBins = 36;
constexpr double kOrientationPeakRatio = 0.8;
constexpr double kDescriptorMagnitudeCap = 0.2;
constexpr int kBorder = 5;
constexpr int kRefineSteps = 5;

struct Octave {
  std::vector<Image> gauss;  // steps + 3 levels
  std::vector<Image> dog;    // steps + 2 levels
};

float px(const Image& img, int y, int x) { return img.at(0, y, x); }

void gradient_at(const Image& img, int y, int x, double& mag, double& ang) {
  const double dx = px(img, y, x + 1) - px(img, y, x - 1);
  const double dy = px(img, y + 1, x) - px(img, y - 1, x);
  mag = std::hypot(dx, dy);
  ang = std::atan2(dy, dx);
}

Image difference(const Image& a, const Image& b) {
  Image out = a;
  out.pixels() = a.pixels() - b.pixels();
  return out;
}

std::vector<Octave> build_scale_space(const Image& base, const FeatureConfig& cfg) {
  const int s = cfg.steps_per_octave;
  const double k = std::pow(2.0, 1.0 / s);
  std::vector<Octave> octaves;
  Image first = gaussian_blur(base, std::sqrt(std::max(0.0, cfg.initial_sigma * cfg.initial_sigma -
                                                                kInputBlur * kInputBlur)));
  while (std::min(first.height(), first.width()) >= cfg.min_octave_size) {
    Octave oct;
    oct.gauss.push_back(first);
    for (int i = 1; i < s + 3; ++i) {
      const double prev = cfg.initial_sigma * std::pow(k, i - 1);
      const double inc = prev * std::sqrt(k * k - 1.0);
      oct.gauss.push_back(gaussian_blur(oct.gauss.back(), inc));
    }
    for (int i = 0; i + 1 < int(oct.gauss.size()); ++i) oct.dog.push_back(difference(oct.gauss[std::size_t(i) + 1], oct.gauss[std::size_t(i)]));
    first = subsample(oct.gauss[std::size_t(s)], 2);
    octaves.push_back(std::move(oct));
  }
  return octaves;
}

bool is_extremum(const std::vector<Image>& dog, int i, int y, int x) {
  const float v = px(dog[std::size_t(i)], y, x);
  const bool is_max = v > 0;
  for (int di = -1; di <= 1; ++di) {
    const Image& d = dog[std::size_t(i + di)];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (di == 0 && dy == 0 && dx == 0) continue;
        const float u = px(d, y + dy, x + dx);
        if (is_max ? u >= v : u <= v) return false;
      }
    }
  }
  return true;
}

struct Refined {
  double x, y, scale, value;
  int layer, ix, iy;
};

// Quadratic refinement in (x, y, scale); rejects low contrast and edge responses.
bool refine(const std::vector<Image>& dog, int layer, int y, int x, const FeatureConfig& cfg, Refined& out) {
  const int s = cfg.steps_per_octave;
  const int h = dog[0].height();
  const int w = dog[0].width();
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad;
  for (int step = 0;; ++step) {
    const Image& d0 = dog[std::size_t(layer - 1)];
    const Image& d1 = dog[std::size_t(layer)];
    const Image& d2 = dog[std::size_t(layer + 1)];
    const double c = px(d1, y, x);
    grad << 0.5 * (px(d1, y, x + 1) - px(d1, y, x - 1)), 0.5 * (px(d1, y + 1, x) - px(d1, y - 1, x)),
        0.5 * (px(d2, y, x) - px(d0, y, x));
    Eigen::Matrix3d hess;
    const double dxx = px(d1, y, x + 1) + px(d1, y, x - 1) - 2 * c;
    const double dyy = px(d1, y + 1, x) + px(d1, y - 1, x) - 2 * c;
    const double dss = px(d2, y, x) + px(d0, y, x) - 2 * c;
    const double dxy = 0.25 * (px(d1, y + 1, x + 1) - px(d1, y + 1, x - 1) - px(d1, y - 1, x + 1) + px(d1, y - 1, x - 1));
    const double dxs = 0.25 * (px(d2, y, x + 1) - px(d2, y, x - 1) - px(d0, y, x + 1) + px(d0, y, x - 1));
    const double dys = 0.25 * (px(d2, y + 1, x) - px(d2, y - 1, x) - px(d0, y + 1, x) + px(d0, y - 1, x));
    hess << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(hess);
    if (!lu.isInvertible()) return false;
    offset = -lu.solve(grad);
    if (offset.cwiseAbs().maxCoeff() < 0.5) {
      const double value = c + 0.5 * grad.dot(offset);
      if (std::fabs(value) < cfg.contrast_threshold / s) return false;
      const double tr = dxx + dyy;
      const double det = dxx * dyy - dxy * dxy;
      const double r = cfg.edge_ratio;
      if (det <= 0 || tr * tr * r >= (r + 1) * (r + 1) * det) return false;
      out = {x + offset[0], y + offset[1], layer + offset[2], value, layer, x, y};
      return true;
    }
    if (step + 1 >= kRefineSteps) return false;
    x += int(std::lround(offset[0]));
    y += int(std::lround(offset[1]));
    layer += int(std::lround(offset[2]));
    if (layer < 1 || layer > s || x < kBorder || y < kBorder || x >= w - kBorder || y >= h - kBorder) return false;
  }
}

std::vector<double> dominant_orientations(const Image& g, int x, int y, double sigma) {
  const int radius = int(std::lround(3.0 * 1.5 * sigma));
  const double wsig = 1.5 * sigma;
  std::vector<double> hist(kOrientationHistBins, 0.0);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int yy = y + dy;
      const int xx = x + dx;
      if (yy < 1 || xx < 1 || yy >= g.height() - 1 || xx >= g.width() - 1) continue;
      double mag = 0;
      double ang = 0;
      gradient_at(g, yy, xx, mag, ang);
      const double weight = std::exp(-(dx * dx + dy * dy) / (2.0 * wsig * wsig));
      int bin = int(std::lround(kOrientationHistBins * (ang + std::numbers::pi) / (2 * std::numbers::pi)));
      bin %= kOrientationHistBins;
      hist[std::size_t(bin)] += weight * mag;
    }
  }
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<double> sm(hist.size());
    for (int i = 0; i < kOrientationHistBins; ++i) {
      const auto at = [&](int j) { return hist[std::size_t((j + kOrientationHistBins) % kOrientationHistBins)]; };
      sm[std::size_t(i)] = (at(i - 1) + at(i) + at(i + 1)) / 3.0;
    }
    hist.swap(sm);
  }
  const double peak = *std::max_element(hist.begin(), hist.end());
  std::vector<double> out;
  if (peak <= 0.0) return out;
  for (int i = 0; i < kOrientationHistBins; ++i) {
    const double l = hist[std::size_t((i + kOrientationHistBins - 1) % kOrientationHistBins)];
    const double c = hist[std::size_t(i)];
    const double r = hist[std::size_t((i + 1) % kOrientationHistBins)];
    if (c < kOrientationPeakRatio * peak || c <= l || c <= r) continue;
    const double shift = 0.5 * (l - r) / (l - 2 * c + r);
    const double bin = i + shift;
    out.push_back(bin * 2 * std::numbers::pi / kOrientationHistBins - std::numbers::pi);
  }
  return out;
}

std::vector<float> describe(const Image& g, double x, double y, double sigma, double orientation,
                            const FeatureConfig& cfg) {
  const int d = cfg.descriptor_grid;
  const int nb = cfg.orientation_bins;
  const double hist_width = 3.0 * sigma;
  const int radius = int(std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5));
  const double co = std::cos(orientation);
  const double si = std::sin(orientation);
  const double wsig2 = 2.0 * (0.5 * d) * (0.5 * d);
  std::vector<double> hist(std::size_t(d) * d * nb, 0.0);
  const int cx = int(std::lround(x));
  const int cy = int(std::lround(y));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int xx = cx + dx;
      const int yy = cy + dy;
      if (yy < 1 || xx < 1 || yy >= g.height() - 1 || xx >= g.width() - 1) continue;
      const double ox = xx - x;
      const double oy = yy - y;
      // Coordinates in the keypoint frame, in units of histogram cells.
      const double rx = (co * ox + si * oy) / hist_width;
      const double ry = (-si * ox + co * oy) / hist_width;
      const double rbin = ry + 0.5 * d - 0.5;
      const double cbin = rx + 0.5 * d - 0.5;
      if (rbin <= -1 || rbin >= d || cbin <= -1 || cbin >= d) continue;
      double mag = 0;
      double ang = 0;
      gradient_at(g, yy, xx, mag, ang);
      double obin = (ang - orientation) * nb / (2 * std::numbers::pi);
      obin = std::fmod(obin, double(nb));
      if (obin < 0) obin += nb;
      const double weight = mag * std::exp(-(rx * rx + ry * ry) / wsig2);
      const int r0 = int(std::floor(rbin));
      const int c0 = int(std::floor(cbin));
      const int o0 = int(std::floor(obin));
      const double fr = rbin - r0;
      const double fc = cbin - c0;
      const double fo = obin - o0;
      for (int ir = 0; ir < 2; ++ir) {
        const int r = r0 + ir;
        if (r < 0 || r >= d) continue;
        const double wr = ir ? fr : 1 - fr;
        for (int ic = 0; ic < 2; ++ic) {
          const int c = c0 + ic;
          if (c < 0 || c >= d) continue;
          const double wc = ic ? fc : 1 - fc;
          for (int io = 0; io < 2; ++io) {
            const int o = (o0 + io) % nb;
            const double wo = io ? fo : 1 - fo;
            hist[(std::size_t(r) * d + c) * nb + o] += weight * wr * wc * wo;
          }
        }
      }
    }
  }
  Eigen::Map<Eigen::VectorXd> v(hist.data(), Eigen::Index(hist.size()));
  const double n1 = v.norm();
  if (n1 > 0) v /= n1;
  v = v.cwiseMin(kDescriptorMagnitudeCap);
  const double n2 = v.norm();
  if (n2 > 0) v /= n2;
  return std::vector<float>(hist.begin(), hist.end());
}

}  // namespace

void FeatureConfig::validate() const {
  if (descriptor_grid < 1) throw std::invalid_argument("feature.descriptor_grid must be >= 1");
  if (orientation_bins < 1) throw std::invalid_argument("feature.orientation_bins must be >= 1");
  if (min_octave_size < 2 * kBorder + 3 || max_octave_size < min_octave_size) {
    throw std::invalid_argument("feature octave range is invalid (need 13 <= min_octave_size <= max_octave_size)");
  }
  if (steps_per_octave < 1) throw std::invalid_argument("feature.steps_per_octave must be >= 1");
  if (!(initial_sigma > kInputBlur)) throw std::invalid_argument("feature.initial_sigma must exceed 0.5");
  if (!(contrast_threshold >= 0.0)) throw std::invalid_argument("feature.contrast_threshold must be >= 0");
  if (!(edge_ratio > 1.0)) throw std::invalid_argument("feature.edge_ratio must be > 1");
  if (!(ratio_test > 0.0 && ratio_test <= 1.0)) throw std::invalid_argument("feature.ratio_test must be in (0, 1]");
  if (min_keypoints < 2) throw std::invalid_argument("feature.min_keypoints must be >= 2");
  if (ransac.min_inliers < 2) throw std::invalid_argument("feature.min_inliers must be >= 2");
  if (ransac.iterations < 1) throw std::invalid_argument("feature.ransac_iterations must be >= 1");
  if (!(ransac.threshold > 0.0)) throw std::invalid_argument("feature.ransac_threshold must be positive");
}

FeatureSet detect_features(const Image& img, const FeatureConfig& cfg) {
  cfg.validate();
  Image base = normalize_minmax(to_single_channel(img));
  double to_input = 1.0;
  while (std::max(base.height(), base.width()) > cfg.max_octave_size) {
    base = subsample(gaussian_blur(base, 1.0), 2);
    to_input *= 2.0;
  }
  const int s = cfg.steps_per_octave;
  const std::vector<Octave> octaves = build_scale_space(base, cfg);
  FeatureSet out;
  std::vector<std::vector<float>> descriptors;
  for (std::size_t o = 0; o < octaves.size(); ++o) {
    const Octave& oct = octaves[o];
    const int h = oct.dog[0].height();
    const int w = oct.dog[0].width();
    const double octave_scale = to_input * std::pow(2.0, double(o));
    const float prelim = float(0.5 * cfg.contrast_threshold / s);
    for (int layer = 1; layer <= s; ++layer) {
      for (int y = kBorder; y < h - kBorder; ++y) {
        for (int x = kBorder; x < w - kBorder; ++x) {
          if (std::fabs(px(oct.dog[std::size_t(layer)], y, x)) <= prelim) continue;
          if (!is_extremum(oct.dog, layer, y, x)) continue;
          Refined r{};
          if (!refine(oct.dog, layer, y, x, cfg, r)) continue;
          const double sigma = cfg.initial_sigma * std::pow(2.0, r.scale / s);
          const Image& g = oct.gauss[std::size_t(r.layer)];
          for (const double ori : dominant_orientations(g, r.ix, r.iy, sigma)) {
            Keypoint kp;
            kp.position = Point2D(r.x, r.y) * octave_scale;
            kp.sigma = sigma * octave_scale;
            kp.orientation = ori;
            kp.octave = int(o);
            kp.response = std::fabs(r.value);
            out.keypoints.push_back(kp);
            descriptors.push_back(describe(g, r.x, r.y, sigma, ori, cfg));
          }
        }
      }
    }
  }
  const int dim = cfg.descriptor_grid * cfg.descriptor_grid * cfg.orientation_bins;
  out.descriptors.resize(Eigen::Index(descriptors.size()), dim);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    out.descriptors.row(Eigen::Index(i)) = Eigen::Map<const Eigen::RowVectorXf>(descriptors[i].data(), dim);
  }
  return out;
}

std::vector<std::pair<int, int>> match_features(const FeatureSet& a, const FeatureSet& b, double ratio) {
  std::vector<std::pair<int, int>> matches;
  if (a.descriptors.rows() == 0 || b.descriptors.rows() < 2) return matches;
  if (a.descriptors.cols() != b.descriptors.cols()) throw std::invalid_argument("descriptor sizes differ");
  const Eigen::MatrixXf cross = a.descriptors * b.descriptors.transpose();
  const Eigen::VectorXf na = a.descriptors.rowwise().squaredNorm();
  const Eigen::VectorXf nb = b.descriptors.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < cross.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    int arg = -1;
    for (Eigen::Index j = 0; j < cross.cols(); ++j) {
      const double d2 = std::max(0.0, double(na[i]) + nb[j] - 2.0 * cross(i, j));
      if (d2 < best) {
        second = best;
        best = d2;
        arg = int(j);
      } else if (d2 < second) {
        second = d2;
      }
    }
    if (arg >= 0 && std::sqrt(best) < ratio * std::sqrt(second)) matches.emplace_back(int(i), arg);
  }
  return matches;
}

}  // namespace comir
