#include "comir/registration/rigid_fit.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace comir {

namespace {

RigidTransform2D from_angle_and_means(double angle, const Point2D& mp, const Point2D& mq, const Point2D& pivot) {
  RigidTransform2D t{angle, Point2D::Zero(), pivot};
  // q = R (p - c) + c + t at the centroids.
  t.translation = mq - t.rotation() * (mp - pivot) - pivot;
  return t;
}

}  // namespace

std::optional<RigidTransform2D> rigid_from_two_pairs(const Point2D& p1, const Point2D& p2, const Point2D& q1,
                                                     const Point2D& q2, const Point2D& pivot) {
  const Point2D dp = p2 - p1;
  const Point2D dq = q2 - q1;
  if (dp.norm() < 1e-12 || dq.norm() < 1e-12) return std::nullopt;
  const double angle = wrap_angle(std::atan2(dq.y(), dq.x()) - std::atan2(dp.y(), dp.x()));
  return from_angle_and_means(angle, 0.5 * (p1 + p2), 0.5 * (q1 + q2), pivot);
}

RigidTransform2D fit_rigid_least_squares(const std::vector<Point2D>& p, const std::vector<Point2D>& q,
                                         const Point2D& pivot) {
  if (p.size() != q.size() || p.empty()) throw std::invalid_argument("rigid fit needs matching, non-empty point sets");
  Point2D mp = Point2D::Zero();
  Point2D mq = Point2D::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mq += q[i];
  }
  mp /= double(p.size());
  mq /= double(q.size());
  // Optimal 2-D rotation: atan2 of summed cross and dot products of centred pairs.
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2D a = p[i] - mp;
    const Point2D b = q[i] - mq;
    cos_sum += a.dot(b);
    sin_sum += a.x() * b.y() - a.y() * b.x();
  }
  const double angle = (sin_sum == 0.0 && cos_sum == 0.0) ? 0.0 : std::atan2(sin_sum, cos_sum);
  return from_angle_and_means(angle, mp, mq, pivot);
}

std::optional<RansacResult> ransac_rigid(const std::vector<Point2D>& p, const std::vector<Point2D>& q,
                                         const Point2D& pivot, const RansacConfig& cfg, std::uint64_t seed) {
  if (p.size() != q.size()) throw std::invalid_argument("ransac: correspondence lists differ in length");
  if (cfg.min_inliers < 2) throw std::invalid_argument("ransac: min_inliers must be >= 2");
  if (p.size() < 2 || int(p.size()) < cfg.min_inliers) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
  const double thr2 = cfg.threshold * cfg.threshold;

  auto score = [&](const RigidTransform2D& t, std::vector<bool>* mask) {
    int count = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool in = (apply_rigid(t, p[i]) - q[i]).squaredNorm() < thr2;
      count += in;
      if (mask) (*mask)[i] = in;
    }
    return count;
  };

  int best_count = -1;
  RigidTransform2D best;
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i == j) continue;
    const auto t = rigid_from_two_pairs(p[i], p[j], q[i], q[j], pivot);
    if (!t) continue;
    const int count = score(*t, nullptr);
    if (count > best_count) {
      best_count = count;
      best = *t;
    }
  }
  if (best_count < cfg.min_inliers) return std::nullopt;

  RansacResult out;
  out.inliers.assign(p.size(), false);
  out.transform = best;
  for (int round = 0; round < 2; ++round) {
    score(out.transform, &out.inliers);
    std::vector<Point2D> pi;
    std::vector<Point2D> qi;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (out.inliers[k]) {
        pi.push_back(p[k]);
        qi.push_back(q[k]);
      }
    }
    if (int(pi.size()) < cfg.min_inliers) return std::nullopt;
    out.transform = fit_rigid_least_squares(pi, qi, pivot);
  }
  out.inlier_count = score(out.transform, &out.inliers);
  if (out.inlier_count < cfg.min_inliers) return std::nullopt;
  return out;
}

}  // namespace comir
