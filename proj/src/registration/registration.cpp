#include "comir/registration/registration.hpp"

#include "comir/filters.hpp"
#include "comir/seed.hpp"

#include <chrono>
#include <cmath>

namespace comir {

Method parse_method(const std::string& name) {
  if (name == "mi") return Method::mi;
  if (name == "intensity") return Method::intensity;
  if (name == "feature") return Method::feature;
  throw std::invalid_argument("unknown registration method '" + name + "' (expected mi, intensity or feature)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::mi:
      return "mi";
    case Method::intensity:
      return "intensity";
    case Method::feature:
      return "feature";
  }
  return "mi";
}

Image to_single_channel(const Image& img) {
  if (img.empty()) throw RegistrationError("registration input is empty");
  if (!img.all_finite()) throw RegistrationError("registration input contains non-finite values");
  if (img.channels() == 1) return img;
  return principal_component(img);
}

RegistrationResult register_features(const Image& ref, const Image& flt, const FeatureConfig& cfg,
                                     std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  RegistrationResult result;
  result.method = Method::feature;
  auto finish = [&](bool ok, std::string message) {
    result.success = ok;
    result.converged = ok;
    result.message = std::move(message);
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  };
  const FeatureSet a = detect_features(ref, cfg);
  const FeatureSet b = detect_features(flt, cfg);
  if (int(a.keypoints.size()) < cfg.min_keypoints || int(b.keypoints.size()) < cfg.min_keypoints) {
    return finish(false, "too few keypoints (" + std::to_string(a.keypoints.size()) + " reference, " +
                             std::to_string(b.keypoints.size()) + " floating)");
  }
  const auto matches = match_features(a, b, cfg.ratio_test);
  std::vector<Point2D> p;
  std::vector<Point2D> q;
  for (const auto& [i, j] : matches) {
    p.push_back(a.keypoints[std::size_t(i)].position);
    q.push_back(b.keypoints[std::size_t(j)].position);
  }
  const Point2D pivot = ref.center();
  const auto fit = ransac_rigid(p, q, pivot, cfg.ransac, derive_seed(seed, "ransac"));
  if (!fit) return finish(false, "too few inliers among " + std::to_string(matches.size()) + " matches");
  double residual = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (fit->inliers[k]) residual += (apply_rigid(fit->transform, p[k]) - q[k]).norm();
  }
  result.transform = fit->transform;
  result.objective = residual / fit->inlier_count;
  result.trace.push_back(result.objective);
  result.iterations = cfg.ransac.iterations;
  return finish(true, std::to_string(fit->inlier_count) + " inliers of " + std::to_string(matches.size()) +
                          " matches");
}

RegistrationResult register_once(Method method, const Image& ref, const Image& flt, const MethodConfigs& cfg,
                                 std::uint64_t seed, const RigidTransform2D& init) {
  switch (method) {
    case Method::mi:
      return register_mi(ref, flt, cfg.mi, seed, init);
    case Method::intensity:
      return register_intensity(ref, flt, cfg.intensity, seed, init);
    case Method::feature:
      return register_features(ref, flt, cfg.feature, seed);
  }
  throw RegistrationError("unknown method");
}

RegistrationResult register_multistart(Method method, const Image& ref, const Image& flt,
                                       const std::vector<RigidTransform2D>& starts, const MethodConfigs& cfg,
                                       std::uint64_t seed) {
  if (starts.empty()) throw RegistrationError("multistart needs at least one start");
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<RegistrationResult> best;
  std::string failures;
  for (const RigidTransform2D& s : starts) {
    RegistrationResult r;
    try {
      r = register_once(method, ref, flt, cfg, seed, s);
    } catch (const RegistrationError& e) {
      failures += std::string(failures.empty() ? "" : "; ") + e.what();
      continue;
    }
    if (!r.success) {
      failures += std::string(failures.empty() ? "" : "; ") + r.message;
      continue;
    }
    if (!best || r.cost() < best->cost()) best = std::move(r);
  }
  if (!best) throw RegistrationError("all " + std::to_string(starts.size()) + " starts failed: " + failures);
  if (starts.size() > 1) {
    best->runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return *best;
}

std::vector<RigidTransform2D> rotation_starts(const Image& ref, const std::vector<double>& angles) {
  std::vector<RigidTransform2D> out;
  for (const double a : angles) out.push_back(RigidTransform2D{a, Point2D::Zero(), ref.center()});
  return out;
}

}  // namespace comir
