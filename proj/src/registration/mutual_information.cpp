#include "comir/registration/mutual_information.hpp"

#include "comir/filters.hpp"
#include "comir/seed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace comir {

namespace {

double cubic_bspline(double t) {
  t = std::fabs(t);
  if (t < 1.0) return (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0;
  if (t < 2.0) {
    const double u = 2.0 - t;
    return u * u * u / 6.0;
  }
  return 0.0;
}

int nearest_bin(double u, int bins) { return std::clamp(int(std::lround(u)), 0, bins - 1); }

}  // namespace

ParzenWindow parse_parzen_window(const std::string& name) {
  if (name == "box") return ParzenWindow::box;
  if (name == "bspline") return ParzenWindow::bspline;
  throw std::invalid_argument("unknown Parzen window '" + name + "' (expected box or bspline)");
}

std::string to_string(ParzenWindow w) { return w == ParzenWindow::box ? "box" : "bspline"; }

double MIConfig::es_shrink() const { return std::pow(es_growth, -0.25); }

MIConfig MIConfig::desk() {
  MIConfig cfg;
  cfg.bins = 20;
  cfg.es_initial_radius = 6.0;
  cfg.es_min_radius = 1e-3;
  cfg.es_growth = 1.05;
  return cfg;
}

void MIConfig::validate() const {
  if (bins < 2) throw std::invalid_argument("mi.bins must be >= 2");
  if (spatial_samples < 2) throw std::invalid_argument("mi.spatial_samples must be >= 2");
  if (!(es_initial_radius > 0.0)) throw std::invalid_argument("mi.es_initial_radius must be positive");
  if (!(es_min_radius > 0.0)) throw std::invalid_argument("mi.es_min_radius must be positive");
  if (!(es_growth > 1.0)) throw std::invalid_argument("mi.es_growth must be > 1");
  if (max_iterations < 1) throw std::invalid_argument("mi.max_iterations must be >= 1");
  if (!(min_overlap_fraction >= 0.0 && min_overlap_fraction <= 1.0)) {
    throw std::invalid_argument("mi.min_overlap_fraction must be in [0, 1]");
  }
}

std::vector<Point2D> mi_sample_positions(int height, int width, int samples, std::uint64_t seed) {
  const long total = long(height) * width;
  std::vector<long> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0L);
  if (samples < total) {
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `samples` entries are a uniform draw.
    for (long i = 0; i < samples; ++i) {
      std::uniform_int_distribution<long> pick(i, total - 1);
      std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(samples));
  }
  std::vector<Point2D> out;
  out.reserve(idx.size());
  for (const long i : idx) out.emplace_back(double(i % width), double(i / width));
  return out;
}

MattesMI::MattesMI(const Image& ref, const Image& flt, const MIConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  const Image r = normalize_minmax(to_single_channel(ref));
  flt_ = normalize_minmax(to_single_channel(flt));
  positions_ = mi_sample_positions(r.height(), r.width(), cfg.spatial_samples, seed);
  ref_bins_.reserve(positions_.size());
  for (const Point2D& p : positions_) {
    ref_bins_.push_back(nearest_bin(r.at(0, int(p.y()), int(p.x())) * double(cfg.bins - 1), cfg.bins));
  }
  ref_center_ = r.center();
  half_diagonal_ = std::max(1.0, 0.5 * std::hypot(double(r.width()), double(r.height())));
}

std::optional<double> MattesMI::evaluate(const RigidTransform2D& t, int min_samples) const {
  const int bins = cfg_.bins;
  std::vector<double> joint(std::size_t(bins) * bins, 0.0);
  const Eigen::Matrix2d rot = t.rotation();
  const Point2D off = t.offset();
  int used = 0;
  for (std::size_t s = 0; s < positions_.size(); ++s) {
    const Point2D q = rot * positions_[s] + off;
    float v = 0.0f;
    if (!sample(flt_, 0, q.x(), q.y(), Interpolation::linear, v)) continue;
    ++used;
    double* row = joint.data() + std::size_t(ref_bins_[s]) * bins;
    const double u = double(v) * (bins - 1);
    if (cfg_.window == ParzenWindow::box) {
      row[nearest_bin(u, bins)] += 1.0;
      continue;
    }
    const int lo = std::max(0, int(std::floor(u)) - 1);
    const int hi = std::min(bins - 1, int(std::floor(u)) + 2);
    double wsum = 0.0;
    double w[4] = {0, 0, 0, 0};
    for (int j = lo; j <= hi; ++j) wsum += (w[j - lo] = cubic_bspline(u - j));
    for (int j = lo; j <= hi; ++j) row[j] += w[j - lo] / wsum;
  }
  if (used == 0 || used < min_samples) return std::nullopt;

  std::vector<double> pr(std::size_t(bins), 0.0);
  std::vector<double> pf(std::size_t(bins), 0.0);
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint[std::size_t(i) * bins + j] / used;
      joint[std::size_t(i) * bins + j] = p;
      pr[std::size_t(i)] += p;
      pf[std::size_t(j)] += p;
    }
  }
  double mi = 0.0;
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint[std::size_t(i) * bins + j];
      if (p > 0.0) mi += p * std::log(p / (pr[std::size_t(i)] * pf[std::size_t(j)]));
    }
  }
  return mi;
}

double mattes_mi(const Image& ref, const Image& flt, const RigidTransform2D& t, const MIConfig& cfg,
                 std::uint64_t seed) {
  const MattesMI est(ref, flt, cfg, seed);
  const auto mi = est.evaluate(t);
  if (!mi) throw RegistrationError("mutual information: transformed floating image does not overlap the samples");
  return *mi;
}

RegistrationResult register_mi(const Image& ref, const Image& flt, const MIConfig& cfg, std::uint64_t seed,
                               const RigidTransform2D& init) {
  const auto start = std::chrono::steady_clock::now();
  if (!init.is_finite()) throw RegistrationError("mi: initial transform is not finite");
  const MattesMI est(ref, flt, cfg, seed);
  const Point2D c = est.reference_center();
  const double scale = est.half_diagonal();
  const int min_samples = std::max(1, int(std::ceil(cfg.min_overlap_fraction * est.sample_count())));

  auto to_transform = [&](const Eigen::Vector3d& x) {
    return RigidTransform2D{x[0] / scale, Point2D(x[1], x[2]), c};
  };
  const RigidTransform2D init_c = init.about(c);
  Eigen::Vector3d parent(init_c.angle * scale, init_c.translation.x(), init_c.translation.y());
  const auto first = est.evaluate(to_transform(parent), min_samples);
  if (!first) throw RegistrationError("mi: initial transform leaves too little overlap");
  double best = *first;

  std::mt19937_64 rng(derive_seed(seed, "es"));
  std::normal_distribution<double> normal(0.0, 1.0);
  double radius = cfg.es_initial_radius;
  const double shrink = cfg.es_shrink();

  RegistrationResult result;
  result.method = Method::mi;
  result.trace.reserve(std::size_t(cfg.max_iterations));
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (radius < cfg.es_min_radius) {
      result.converged = true;
      break;
    }
    const Eigen::Vector3d child = parent + radius * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    const auto value = est.evaluate(to_transform(child), min_samples);
    if (value && *value > best) {
      parent = child;
      best = *value;
      radius *= cfg.es_growth;
    } else {
      radius *= shrink;
    }
    result.trace.push_back(best);
  }
  if (result.trace.empty()) result.trace.push_back(best);
  result.iterations = it;
  result.transform = to_transform(parent);
  result.objective = best;
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace comir
