#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "comir/eval.hpp"
#include "comir/filters.hpp"
#include "comir/registration/registration.hpp"
#include "comir/synthetic.hpp"
#include "test_helpers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

using namespace comir;

namespace {

// Plug-in entropy (nats) of the nearest-bin histogram of a min-max normalised image.
double histogram_entropy(const Image& img, int bins) {
  float lo = img.pixels().minCoeff(), hi = img.pixels().maxCoeff();
  std::map<long, double> counts;
  const long n = img.pixels().size();
  for (long i = 0; i < n; ++i) {
    const double v = (double(img.pixels().data()[i]) - lo) / (double(hi) - lo);
    counts[std::clamp(std::lround(v * (bins - 1)), 0L, long(bins - 1))] += 1.0;
  }
  double h = 0.0;
  for (const auto& [bin, c] : counts) h -= c / n * std::log(c / n);
  return h;
}

RigidTransform2D about_center(double angle, double tx, double ty, int size) {
  const double c = 0.5 * (size - 1);
  return RigidTransform2D{angle, Point2D(tx, ty), Point2D(c, c)};
}

double error_of(const RigidTransform2D& truth, const RegistrationResult& r, int size) {
  return registration_error(truth, r.transform, size, size);
}

bool same_result(const RegistrationResult& a, const RegistrationResult& b) {
  return a.transform.angle == b.transform.angle && a.transform.translation == b.transform.translation &&
         a.transform.center == b.transform.center && a.objective == b.objective && a.trace == b.trace &&
         a.iterations == b.iterations && a.converged == b.converged && a.success == b.success;
}

}  // namespace

TEST_CASE("mattes_mi of an image with itself is its histogram entropy") {
  const Image img = test::random_image(1, 20, 24, 3);  // 480 px: every pixel is sampled
  MIConfig cfg;
  cfg.window = ParzenWindow::box;
  const double mi = mattes_mi(img, img, RigidTransform2D{}, cfg, 1);
  CHECK(std::abs(mi - histogram_entropy(img, cfg.bins)) < 1e-6);
}

TEST_CASE("mattes_mi of independent images") {
  // The plug-in estimator is biased upward by roughly (bins-1)^2 / (2 * samples)
  // for independent data; with 500 samples only a coarse histogram can resolve
  // 0.05 nats. The fine histogram still ranks independence far below alignment.
  const Image tex = synthetic_texture(64, 64, 5);
  auto mean_mi = [&](int bins) {
    MIConfig cfg;
    cfg.bins = bins;
    double sum = 0.0;
    for (int s = 0; s < 20; ++s) {
      sum += mattes_mi(tex, test::random_image(1, 64, 64, 100 + s), RigidTransform2D{}, cfg, std::uint64_t(s));
    }
    return sum / 20.0;
  };
  CHECK(mean_mi(6) < 0.05);
  MIConfig fine;
  CHECK(mean_mi(fine.bins) < 0.5 * mattes_mi(tex, tex, RigidTransform2D{}, fine, 0));
}

TEST_CASE("mattes_mi is maximal at self-alignment") {
  const Image img = synthetic_texture(128, 128, 2);
  for (const MIConfig& cfg : {MIConfig{}, MIConfig::desk()}) {
    const double aligned = mattes_mi(img, img, RigidTransform2D{}, cfg, 4);
    CHECK(aligned >= mattes_mi(img, img, RigidTransform2D::pure_translation(50, 0), cfg, 4));
    CHECK(aligned >= mattes_mi(img, img, RigidTransform2D::pure_translation(0, -50), cfg, 4));
  }
}

TEST_CASE("mattes_mi errors") {
  const Image img = synthetic_texture(32, 32, 1);
  CHECK_THROWS_AS(mattes_mi(img, img, RigidTransform2D::pure_translation(1000, 0), MIConfig{}, 0),
                  RegistrationError);
  MIConfig bad;
  bad.bins = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = MIConfig{};
  bad.es_growth = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("mi_sample_positions") {
  CHECK(mi_sample_positions(10, 10, 500, 1).size() == 100);
  const auto a = mi_sample_positions(50, 50, 500, 7);
  CHECK(a.size() == 500);
  CHECK(a == mi_sample_positions(50, 50, 500, 7));
  std::vector<std::pair<double, double>> u;
  for (const Point2D& p : a) u.emplace_back(p.x(), p.y());
  std::sort(u.begin(), u.end());
  CHECK(std::adjacent_find(u.begin(), u.end()) == u.end());
}

TEST_CASE("register_mi self-registration") {
  const Image img = synthetic_texture(128, 128, 11);
  const RegistrationResult r = register_mi(img, img, MIConfig::desk(), 3);
  CHECK(r.transform.is_finite());
  CHECK(error_of(RigidTransform2D{}, r, 128) < 2.0);
}

TEST_CASE("register_mi recovers a 10 px offset") {
  const Image img = synthetic_texture(128, 128, 12);
  int ok = 0;
  for (int s = 0; s < 20; ++s) {
    const double phi = 2.0 * std::numbers::pi * s / 20.0;
    const RigidTransform2D init = RigidTransform2D::pure_translation(10 * std::cos(phi), 10 * std::sin(phi));
    ok += error_of(RigidTransform2D{}, register_mi(img, img, MIConfig::desk(), std::uint64_t(s), init), 128) < 5.0;
  }
  MESSAGE("recovered " << ok << "/20");
  CHECK(ok >= 18);
}

TEST_CASE("register_mi trace and determinism") {
  const Image src = synthetic_texture(200, 200, 13);
  const EvalPair pair = make_eval_pair(src, about_center(0.1, 6, -4, 128), 128);
  const RegistrationResult a = register_mi(pair.reference, pair.floating, MIConfig::desk(), 21);
  const RegistrationResult b = register_mi(pair.reference, pair.floating, MIConfig::desk(), 21);
  REQUIRE_FALSE(a.trace.empty());
  CHECK(std::is_sorted(a.trace.begin(), a.trace.end()));
  CHECK(a.objective == a.trace.back());
  CHECK(same_result(a, b));
  CHECK(a.method == Method::mi);
}

TEST_CASE("register_mi displacement trend") {
  // Averaged over seeds, larger initial offsets leave larger errors.
  const Image src = synthetic_texture(400, 400, 14);
  auto mean_error = [&](double shift) {
    double sum = 0.0;
    for (int s = 0; s < 8; ++s) {
      const double phi = 2.0 * std::numbers::pi * (s + 0.5) / 8.0;
      const RigidTransform2D t = about_center(0.0, shift * std::cos(phi), shift * std::sin(phi), 128);
      const EvalPair pair = make_eval_pair(src, t, 128);
      sum += error_of(t, register_mi(pair.reference, pair.floating, MIConfig::desk(), std::uint64_t(s)), 128);
    }
    return sum / 8.0;
  };
  const double near = mean_error(4.0), far = mean_error(110.0);
  MESSAGE("mean error at 4 px: " << near << ", at 110 px: " << far);
  CHECK(far > near);
}

TEST_CASE("register_intensity self-registration") {
  const Image img = synthetic_texture(128, 128, 15);
  const RegistrationResult r = register_intensity(img, img, IntensityConfig{}, 1);
  CHECK(error_of(RigidTransform2D{}, r, 128) < 2.0);
  REQUIRE_FALSE(r.trace.empty());
  CHECK(r.objective == doctest::Approx(intensity_distance(img, img, r.transform, IntensityConfig{})));
}

TEST_CASE("register_intensity recovers a known perturbation") {
  const Image src = synthetic_texture(448, 448, 16);
  const RigidTransform2D truth = about_center(0.2, 20, 15, 256);
  const EvalPair pair = make_eval_pair(src, truth, 256);
  const RegistrationResult r = register_intensity(pair.reference, pair.floating, IntensityConfig{}, 2);
  MESSAGE("error " << error_of(truth, r, 256));
  CHECK(error_of(truth, r, 256) < 5.0);
  CHECK(same_result(r, register_intensity(pair.reference, pair.floating, IntensityConfig{}, 2)));
}

TEST_CASE("register_intensity errors") {
  Image flat(1, 64, 64);
  flat.pixels().setConstant(0.5f);
  const Image tex = synthetic_texture(64, 64, 1);
  CHECK_THROWS_AS(register_intensity(flat, tex, IntensityConfig{}, 0), RegistrationError);
  CHECK_THROWS_AS(register_intensity(tex, flat, IntensityConfig{}, 0), RegistrationError);
  IntensityConfig bad;
  bad.subsampling = {1, 2, 4};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = IntensityConfig{};
  bad.iterations = {10, 0, 10};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("intensity_distance vanishes at alignment") {
  const Image img = synthetic_texture(96, 96, 17);
  const IntensityConfig cfg;
  CHECK(intensity_distance(img, img, RigidTransform2D{}, cfg) < 1e-12);
  CHECK(intensity_distance(img, img, RigidTransform2D::pure_translation(6, 0), cfg) > 0.0);
}

TEST_CASE("euclidean_distance_transform matches brute force") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution on(0.03);
  const int h = 23, w = 31;
  std::vector<std::uint8_t> mask(std::size_t(h * w));
  for (auto& m : mask) m = on(rng);
  mask[7] = 1;
  const std::vector<float> d = euclidean_distance_transform(mask, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = 1e300;
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
          if (mask[std::size_t(v * w + u)]) best = std::min(best, std::hypot(double(x - u), double(y - v)));
      CHECK(double(d[std::size_t(y * w + x)]) == doctest::Approx(best).epsilon(1e-6));
    }
  }
  const std::vector<float> none = euclidean_distance_transform(std::vector<std::uint8_t>(12, 0), 3, 4);
  CHECK(std::all_of(none.begin(), none.end(), [](float v) { return std::isinf(v); }));
}

TEST_CASE("rigid_from_two_pairs reproduces the generating motion") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-500, 500);
  for (int k = 0; k < 200; ++k) {
    const RigidTransform2D t = test::random_transform(rng, 300);
    const Point2D p1(u(rng), u(rng)), p2(u(rng), u(rng));
    const Point2D pivot(u(rng), u(rng));
    const auto s = rigid_from_two_pairs(p1, p2, apply_rigid(t, p1), apply_rigid(t, p2), pivot);
    REQUIRE(s.has_value());
    CHECK(s->center == pivot);
    for (int j = 0; j < 4; ++j) {
      const Point2D x(u(rng), u(rng));
      CHECK((apply_rigid(*s, x) - apply_rigid(t, x)).norm() < 1e-9);
    }
  }
  CHECK_FALSE(rigid_from_two_pairs({1, 2}, {1, 2}, {0, 0}, {3, 3}, {0, 0}).has_value());
}

TEST_CASE("fit_rigid_least_squares") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 256);
  std::normal_distribution<double> noise(0.0, 0.5);
  const RigidTransform2D t = about_center(-0.4, 12, -7, 256);
  std::vector<Point2D> p, q, qn;
  for (int i = 0; i < 200; ++i) {
    p.emplace_back(u(rng), u(rng));
    q.push_back(apply_rigid(t, p.back()));
    qn.push_back(q.back() + Point2D(noise(rng), noise(rng)));
  }
  const RigidTransform2D exact = fit_rigid_least_squares(p, q, t.center);
  CHECK(registration_error(t, exact, 256, 256) < 1e-9);
  CHECK(registration_error(t, fit_rigid_least_squares(p, qn, t.center), 256, 256) < 0.5);
}

TEST_CASE("ransac_rigid with exact correspondences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 256);
  const RigidTransform2D t = about_center(0.7, -20, 33, 256);
  std::vector<Point2D> p, q;
  for (int i = 0; i < 10; ++i) {
    p.emplace_back(u(rng), u(rng));
    q.push_back(apply_rigid(t, p.back()));
  }
  const auto r = ransac_rigid(p, q, t.center, RansacConfig{}, 1);
  REQUIRE(r.has_value());
  CHECK(r->inlier_count == 10);
  CHECK(registration_error(t, r->transform, 256, 256) < 1e-6);
}

TEST_CASE("ransac_rigid with half outliers") {
  std::uniform_real_distribution<double> u(0, 256);
  std::normal_distribution<double> noise(0.0, 0.3);
  int ok = 0;
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(std::uint64_t(100 + s));
    const RigidTransform2D t = about_center(u(rng) / 256.0 - 0.5, u(rng) / 4 - 32, u(rng) / 4 - 32, 256);
    std::vector<Point2D> p, q;
    for (int i = 0; i < 30; ++i) {
      p.emplace_back(u(rng), u(rng));
      q.push_back(apply_rigid(t, p.back()) + Point2D(noise(rng), noise(rng)));
    }
    for (int i = 0; i < 30; ++i) {
      p.emplace_back(u(rng), u(rng));
      q.emplace_back(u(rng), u(rng));
    }
    const auto r = ransac_rigid(p, q, t.center, RansacConfig{}, std::uint64_t(s));
    ok += r && registration_error(t, r->transform, 256, 256) < 2.0;
  }
  MESSAGE("recovered " << ok << "/20");
  CHECK(ok >= 18);
}

TEST_CASE("ransac_rigid gives up without consensus") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 256);
  std::vector<Point2D> p, q;
  for (int i = 0; i < 12; ++i) {
    p.emplace_back(u(rng), u(rng));
    q.emplace_back(u(rng), u(rng));
  }
  RansacConfig cfg;
  cfg.min_inliers = 6;
  cfg.threshold = 0.5;
  CHECK_FALSE(ransac_rigid(p, q, {128, 128}, cfg, 0).has_value());
}

TEST_CASE("match_features ratio test") {
  FeatureSet a, b;
  a.descriptors.resize(2, 3);
  a.descriptors << 0, 0, 0, 10, 10, 10;
  b.descriptors.resize(3, 3);
  b.descriptors << 0.1f, 0, 0, 5, 5, 5, 10, 10, 9.5f;
  a.keypoints.resize(2);
  b.keypoints.resize(3);
  const auto m = match_features(a, b, 0.8);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == std::pair<int, int>(0, 0));
  CHECK(m[1] == std::pair<int, int>(1, 2));
  // An ambiguous descriptor fails the ratio test.
  b.descriptors.row(1) << 0, 0.1f, 0;
  const auto m2 = match_features(a, b, 0.8);
  CHECK(std::none_of(m2.begin(), m2.end(), [](auto pr) { return pr.first == 0; }));
}

TEST_CASE("register_features recovers a known transform") {
  const Image src = synthetic_texture(448, 448, 18);
  const RigidTransform2D truth = about_center(15.0 * std::numbers::pi / 180.0, 30, -20, 256);
  const EvalPair pair = make_eval_pair(src, truth, 256);
  const RegistrationResult r = register_features(pair.reference, pair.floating, FeatureConfig{}, 3);
  REQUIRE(r.success);
  MESSAGE("error " << error_of(truth, r, 256));
  CHECK(error_of(truth, r, 256) < 2.0);
  CHECK(same_result(r, register_features(pair.reference, pair.floating, FeatureConfig{}, 3)));
}

TEST_CASE("register_features round trip") {
  const Image src = synthetic_texture(448, 448, 19);
  const RigidTransform2D truth = about_center(-0.3, -25, 10, 256);
  const EvalPair pair = make_eval_pair(src, truth, 256);
  const RegistrationResult ab = register_features(pair.reference, pair.floating, FeatureConfig{}, 1);
  const RegistrationResult ba = register_features(pair.floating, pair.reference, FeatureConfig{}, 1);
  REQUIRE(ab.success);
  REQUIRE(ba.success);
  CHECK(registration_error(RigidTransform2D{}, compose(ba.transform, ab.transform), 256, 256) < 4.0);
}

TEST_CASE("register_features declares failure on flat images") {
  Image flat(1, 256, 256);
  flat.pixels().setConstant(0.3f);
  const RegistrationResult r = register_features(flat, flat, FeatureConfig{}, 0);
  CHECK_FALSE(r.success);
  CHECK_FALSE(r.message.empty());
  FeatureConfig bad;
  bad.ransac.min_inliers = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = FeatureConfig{};
  bad.min_octave_size = 2048;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("register_multistart") {
  const Image src = synthetic_texture(448, 448, 20);
  MethodConfigs cfg;

  SUBCASE("single start equals a direct call") {
    const EvalPair pair = make_eval_pair(src, about_center(0.05, 8, 3, 128), 128);
    const RigidTransform2D start = about_center(0.02, 1, 1, 128);
    for (const Method m : {Method::mi, Method::intensity}) {
      CHECK(same_result(register_multistart(m, pair.reference, pair.floating, {start}, cfg, 5),
                        register_once(m, pair.reference, pair.floating, cfg, 5, start)));
    }
  }

  SUBCASE("a start at the ground truth is never worse") {
    const RigidTransform2D truth = about_center(0.5, 40, -30, 256);
    const EvalPair pair = make_eval_pair(src, truth, 256);
    const RegistrationResult single = register_once(Method::mi, pair.reference, pair.floating, cfg, 6);
    const RegistrationResult multi =
        register_multistart(Method::mi, pair.reference, pair.floating, {RigidTransform2D{}, truth}, cfg, 6);
    CHECK(error_of(truth, multi, 256) <= error_of(truth, single, 256));
  }

  SUBCASE("rotational starts pick the basin of the nearest start") {
    const RigidTransform2D truth = about_center(0.28, 0, 0, 256);
    const EvalPair pair = make_eval_pair(src, truth, 256);
    const std::vector<RigidTransform2D> starts = rotation_starts(pair.reference, cfg.intensity.start_rotations);
    REQUIRE(starts.size() == 3);
    std::vector<RegistrationResult> runs;
    for (const auto& s : starts) runs.push_back(register_once(Method::intensity, pair.reference, pair.floating, cfg, 7, s));
    const RegistrationResult best = register_multistart(Method::intensity, pair.reference, pair.floating, starts, cfg, 7);
    const auto lowest = std::min_element(runs.begin(), runs.end(),
                                         [](const auto& a, const auto& b) { return a.cost() < b.cost(); });
    CHECK(best.objective == lowest->objective);
    CHECK(error_of(truth, runs[2], 256) < 5.0);
    CHECK(error_of(truth, best, 256) < 5.0);
    CHECK(best.cost() <= runs[0].cost());
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(register_multistart(Method::mi, src, src, {}, cfg, 0), RegistrationError);
    Image flat(1, 64, 64);
    flat.pixels().setConstant(1.0f);
    CHECK_THROWS_AS(register_multistart(Method::intensity, flat, flat, {RigidTransform2D{}}, cfg, 0),
                    RegistrationError);
  }
}

TEST_CASE("to_single_channel") {
  const Image g = synthetic_texture(32, 32, 4);
  CHECK(to_single_channel(g).pixels().isApprox(g.pixels()));
  Image rgb(3, 32, 32);
  for (int c = 0; c < 3; ++c) rgb.pixels().row(c) = g.pixels().row(0) * float(c + 1);
  const Image one = to_single_channel(rgb);
  REQUIRE(one.channels() == 1);
  // All channels are proportional, so the projection is affine in g.
  std::vector<double> a, b;
  for (long i = 0; i < g.pixels().size(); ++i) {
    a.push_back(g.pixels().data()[i]);
    b.push_back(one.pixels().data()[i]);
  }
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  CHECK(std::abs(sab) / std::sqrt(saa * sbb) > 1 - 1e-6);
}
