#include "comir/registration/alpha_amd.hpp"

#include "comir/filters.hpp"
#include "comir/seed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace comir {

namespace {

constexpr double kFar = 1e20;

// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
void dt1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
  v.assign(std::size_t(n), 0);
  z.assign(std::size_t(n) + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p); };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[std::size_t(k)]);
    // z[0] is -inf, so the loop never pops the first parabola.
    while (s <= z[std::size_t(k)]) s = intersect(q, v[std::size_t(--k)]);
    ++k;
    v[std::size_t(k)] = q;
    z[std::size_t(k)] = s;
    z[std::size_t(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[std::size_t(k) + 1] < q) ++k;
    const int p = v[std::size_t(k)];
    d[q] = double(q - p) * (q - p) + f[p];
  }
}

struct Bilinear {
  double value = 0.0;
  Point2D grad = Point2D::Zero();
};

// Bilinear distance-field lookup with its analytic gradient; false outside the grid.
bool lookup(const std::vector<float>& field, int h, int w, const Point2D& y, Bilinear& out) {
  if (!(y.x() >= 0.0 && y.y() >= 0.0 && y.x() <= w - 1 && y.y() <= h - 1)) return false;
  const int x0 = std::min(int(y.x()), std::max(w - 2, 0));
  const int y0 = std::min(int(y.y()), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = y.x() - x0;
  const double fy = y.y() - y0;
  const double f00 = field[std::size_t(y0) * w + x0];
  const double f01 = field[std::size_t(y0) * w + x1];
  const double f10 = field[std::size_t(y1) * w + x0];
  const double f11 = field[std::size_t(y1) * w + x1];
  out.value = (f00 * (1 - fx) + f01 * fx) * (1 - fy) + (f10 * (1 - fx) + f11 * fx) * fy;
  out.grad.x() = (x1 != x0) ? ((f01 - f00) * (1 - fy) + (f11 - f10) * fy) : 0.0;
  out.grad.y() = (y1 != y0) ? ((f10 - f00) * (1 - fx) + (f11 - f01) * fx) : 0.0;
  return true;
}

Image squash_and_normalize(const Image& img, Squash squash) {
  Image g = to_single_channel(img);
  if (squash == Squash::logistic) {
    g.pixels() = g.pixels().unaryExpr([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
  }
  return normalize_minmax(g);
}

// One pyramid level of one image: quantised values and one cost field per level value.
struct LevelImage {
  int factor = 1;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> quant;
  std::vector<std::vector<float>> fields;  // fields[a]: cost for a point of quantised value a
};

LevelImage build_level(const Image& base, int factor, double sigma, int levels) {
  const Image img = subsample(gaussian_blur(base, sigma), factor);
  LevelImage out;
  out.factor = factor;
  out.height = img.height();
  out.width = img.width();
  const std::size_t n = std::size_t(out.height) * out.width;
  out.quant.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::clamp(double(img.pixels()(0, Eigen::Index(i))), 0.0, 1.0);
    out.quant[i] = std::uint8_t(std::lround(v * levels));
  }
  const float cap = float(out.height + out.width);
  std::vector<std::vector<float>> inside(std::size_t(levels) + 1);
  std::vector<std::vector<float>> outside(std::size_t(levels) + 1);
  std::vector<std::uint8_t> mask(n);
  for (int k = 1; k <= levels; ++k) {
    for (std::size_t i = 0; i < n; ++i) mask[i] = out.quant[i] >= k;
    inside[std::size_t(k)] = euclidean_distance_transform(mask, out.height, out.width);
    for (std::size_t i = 0; i < n; ++i) mask[i] = !mask[i];
    outside[std::size_t(k)] = euclidean_distance_transform(mask, out.height, out.width);
    for (auto* f : {&inside[std::size_t(k)], &outside[std::size_t(k)]}) {
      for (float& d : *f) d = std::min(d, cap);
    }
  }
  out.fields.assign(std::size_t(levels) + 1, std::vector<float>(n, 0.0f));
  for (int a = 0; a <= levels; ++a) {
    auto& f = out.fields[std::size_t(a)];
    for (int k = 1; k <= levels; ++k) {
      const auto& src = k <= a ? inside[std::size_t(k)] : outside[std::size_t(k)];
      for (std::size_t i = 0; i < n; ++i) f[i] += src[i];
    }
    for (float& d : f) d /= float(levels);
  }
  return out;
}

struct PointSample {
  Point2D pos;  // full-resolution coordinates in the source image
  int value = 0;
};

// Mean cost and gradient w.r.t. (theta, tx, ty) of one direction over the
// points that land inside the target; +inf when none do.
// forward: points of ref mapped by t into flt; otherwise flt points mapped by t^-1 into ref.
double direction_cost(const std::vector<PointSample>& pts, const LevelImage& target, const RigidTransform2D& t,
                      bool forward, Eigen::Vector3d* grad) {
  const double s = target.factor;
  const double ca = std::cos(t.angle);
  const double sa = std::sin(t.angle);
  Eigen::Matrix2d r;
  r << ca, -sa, sa, ca;
  Eigen::Matrix2d dr;
  dr << -sa, -ca, ca, -sa;
  const Point2D c = t.center;
  double total = 0.0;
  std::size_t used = 0;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (const PointSample& ps : pts) {
    Point2D y;
    Point2D dy_dtheta;
    if (forward) {
      y = r * (ps.pos - c) + c + t.translation;
      dy_dtheta = dr * (ps.pos - c);
    } else {
      const Point2D d = ps.pos - c - t.translation;
      y = r.transpose() * d + c;
      dy_dtheta = dr.transpose() * d;
    }
    Bilinear b;
    if (!lookup(target.fields[std::size_t(ps.value)], target.height, target.width, y / s, b)) continue;
    ++used;
    total += b.value * s;
    if (grad) {
      g[0] += b.grad.dot(dy_dtheta);
      const Point2D dt = forward ? b.grad : Point2D(-(r * b.grad));
      g[1] += dt.x();
      g[2] += dt.y();
    }
  }
  if (grad) *grad = used ? Eigen::Vector3d(g / double(used)) : Eigen::Vector3d::Zero();
  return used ? total / double(used) : std::numeric_limits<double>::infinity();
}

std::vector<PointSample> all_points(const LevelImage& lv) {
  std::vector<PointSample> pts;
  pts.reserve(lv.quant.size());
  for (int y = 0; y < lv.height; ++y) {
    for (int x = 0; x < lv.width; ++x) {
      pts.push_back({Point2D(double(x) * lv.factor, double(y) * lv.factor), lv.quant[std::size_t(y) * lv.width + x]});
    }
  }
  return pts;
}

void draw_points(const LevelImage& lv, int count, std::mt19937_64& rng, std::vector<PointSample>& out) {
  std::uniform_int_distribution<int> px(0, lv.width - 1);
  std::uniform_int_distribution<int> py(0, lv.height - 1);
  out.clear();
  for (int i = 0; i < count; ++i) {
    const int x = px(rng);
    const int y = py(rng);
    out.push_back({Point2D(double(x) * lv.factor, double(y) * lv.factor), lv.quant[std::size_t(y) * lv.width + x]});
  }
}

bool is_constant(const LevelImage& lv) {
  return std::adjacent_find(lv.quant.begin(), lv.quant.end(), std::not_equal_to<>()) == lv.quant.end();
}

}  // namespace

Squash parse_squash(const std::string& name) {
  if (name == "logistic") return Squash::logistic;
  if (name == "none") return Squash::none;
  throw std::invalid_argument("unknown squash '" + name + "' (expected logistic or none)");
}

std::string to_string(Squash s) { return s == Squash::logistic ? "logistic" : "none"; }

void IntensityConfig::validate() const {
  const std::size_t n = subsampling.size();
  if (n == 0) throw std::invalid_argument("intensity.subsampling must list at least one level");
  if (sigmas.size() != n || iterations.size() != n || step_sizes.size() != n) {
    throw std::invalid_argument("intensity.sigmas, iterations and step_sizes must match intensity.subsampling");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (subsampling[i] < 1) throw std::invalid_argument("intensity.subsampling factors must be >= 1");
    if (i > 0 && subsampling[i] >= subsampling[i - 1]) {
      throw std::invalid_argument("intensity.subsampling must be strictly decreasing");
    }
    if (iterations[i] < 1) throw std::invalid_argument("intensity.iterations must be positive");
    if (!(step_sizes[i] > 0.0)) throw std::invalid_argument("intensity.step_sizes must be positive");
    if (sigmas[i] < 0.0) throw std::invalid_argument("intensity.sigmas must be non-negative");
  }
  if (!(final_step > 0.0)) throw std::invalid_argument("intensity.final_step must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("intensity.momentum must be in [0, 1)");
  if (!(gradient_clip > 0.0)) throw std::invalid_argument("intensity.gradient_clip must be positive");
  if (quantization_levels < 1 || quantization_levels > 255) {
    throw std::invalid_argument("intensity.quantization_levels must be in [1, 255]");
  }
  if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0)) {
    throw std::invalid_argument("intensity.sampling_fraction must be in (0, 1]");
  }
  if (min_samples < 1) throw std::invalid_argument("intensity.min_samples must be >= 1");
}

std::vector<float> euclidean_distance_transform(const std::vector<std::uint8_t>& mask, int height, int width) {
  if (mask.size() != std::size_t(height) * width) throw std::invalid_argument("distance transform: mask size");
  const std::size_t n = mask.size();
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    return std::vector<float>(n, std::numeric_limits<float>::infinity());
  }
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = mask[i] ? 0.0 : kFar;
  const int longest = std::max(height, width);
  std::vector<double> f(static_cast<std::size_t>(longest));
  std::vector<double> d(static_cast<std::size_t>(longest));
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[std::size_t(y)] = grid[std::size_t(y) * width + x];
    dt1d(f.data(), height, d.data(), v, z);
    for (int y = 0; y < height; ++y) grid[std::size_t(y) * width + x] = d[std::size_t(y)];
  }
  for (int y = 0; y < height; ++y) {
    double* row = grid.data() + std::size_t(y) * width;
    dt1d(row, width, d.data(), v, z);
    std::copy(d.begin(), d.begin() + width, row);
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = float(std::sqrt(grid[i]));
  return out;
}

double intensity_distance(const Image& ref, const Image& flt, const RigidTransform2D& t,
                          const IntensityConfig& cfg) {
  cfg.validate();
  const int q = cfg.quantization_levels;
  const int factor = cfg.subsampling.back();
  const LevelImage a = build_level(squash_and_normalize(ref, cfg.squash), factor, cfg.sigmas.back(), q);
  const LevelImage b = build_level(squash_and_normalize(flt, cfg.squash), factor, cfg.sigmas.back(), q);
  return 0.5 * (direction_cost(all_points(a), b, t, true, nullptr) + direction_cost(all_points(b), a, t, false, nullptr));
}

RegistrationResult register_intensity(const Image& ref, const Image& flt, const IntensityConfig& cfg,
                                      std::uint64_t seed, const RigidTransform2D& init) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  if (!init.is_finite()) throw RegistrationError("intensity: initial transform is not finite");
  const int q = cfg.quantization_levels;
  const Image a_base = squash_and_normalize(ref, cfg.squash);
  const Image b_base = squash_and_normalize(flt, cfg.squash);
  const Point2D c = a_base.center();
  const double scale = std::max(1.0, 0.5 * std::hypot(double(a_base.width()), double(a_base.height())));

  RigidTransform2D t = init.about(c);
  Eigen::Vector3d x(t.angle * scale, t.translation.x(), t.translation.y());
  auto current = [&] { return RigidTransform2D{x[0] / scale, Point2D(x[1], x[2]), c}; };

  std::mt19937_64 rng(derive_seed(seed, "intensity"));
  RegistrationResult result;
  result.method = Method::intensity;
  std::vector<PointSample> pa;
  std::vector<PointSample> pb;
  LevelImage la;
  LevelImage lb;
  const std::size_t levels = cfg.subsampling.size();
  for (std::size_t l = 0; l < levels; ++l) {
    la = build_level(a_base, cfg.subsampling[l], cfg.sigmas[l], q);
    lb = build_level(b_base, cfg.subsampling[l], cfg.sigmas[l], q);
    if (l + 1 == levels && (is_constant(la) || is_constant(lb))) {
      throw RegistrationError("intensity: image is constant after quantisation");
    }
    const int na = std::max(cfg.min_samples, int(std::lround(cfg.sampling_fraction * la.quant.size())));
    const int nb = std::max(cfg.min_samples, int(std::lround(cfg.sampling_fraction * lb.quant.size())));
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    const int iters = cfg.iterations[l];
    for (int it = 0; it < iters; ++it) {
      double step = cfg.step_sizes[l];
      if (l + 1 == levels && iters > 1) {
        step += (cfg.final_step - cfg.step_sizes[l]) * double(it) / double(iters - 1);
      }
      draw_points(la, na, rng, pa);
      draw_points(lb, nb, rng, pb);
      const RigidTransform2D cur = current();
      Eigen::Vector3d ga;
      Eigen::Vector3d gb;
      const double cost = 0.5 * (direction_cost(pa, lb, cur, true, &ga) + direction_cost(pb, la, cur, false, &gb));
      Eigen::Vector3d g = 0.5 * (ga + gb);
      g[0] /= scale;
      g = g.cwiseMax(-cfg.gradient_clip).cwiseMin(cfg.gradient_clip);
      velocity = cfg.momentum * velocity + (1.0 - cfg.momentum) * g;
      x -= step * velocity;
      result.trace.push_back(cost);
      ++result.iterations;
    }
  }
  result.transform = current();
  // Final objective on every pixel of the finest level, both directions.
  result.objective =
      0.5 * (direction_cost(all_points(la), lb, result.transform, true, nullptr) +
             direction_cost(all_points(lb), la, result.transform, false, nullptr));
  result.converged = true;
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace comir
