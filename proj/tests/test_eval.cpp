#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "comir/eval.hpp"
#include "comir/synthetic.hpp"
#include "test_helpers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace comir;

namespace {

std::vector<Point2D> corners(int h, int w) {
  return {Point2D(0, 0), Point2D(w - 1, 0), Point2D(w - 1, h - 1), Point2D(0, h - 1)};
}

// Explicit 4-corner mean distance.
double corner_oracle(const RigidTransform2D& a, const RigidTransform2D& b, int h, int w) {
  double sum = 0.0;
  for (const Point2D& c : corners(h, w)) sum += (apply_rigid(a, c) - apply_rigid(b, c)).norm();
  return sum / 4.0;
}

}  // namespace

TEST_CASE("registration_error") {
  const RigidTransform2D id{};
  CHECK(registration_error(id, id, 834, 834) == 0.0);
  CHECK(registration_error(id, RigidTransform2D::pure_translation(30, 40), 834, 834) == doctest::Approx(50.0).epsilon(1e-12));

  const Point2D c(416.5, 416.5);
  const RigidTransform2D rot{30.0 * std::numbers::pi / 180.0, Point2D::Zero(), c};
  const double r = std::hypot(416.5, 416.5);
  CHECK(std::abs(registration_error(id, rot, 834, 834) - corner_oracle(id, rot, 834, 834)) < 1e-9);
  CHECK(std::abs(registration_error(id, rot, 834, 834) - 2.0 * r * std::sin(15.0 * std::numbers::pi / 180.0)) < 1e-9);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const RigidTransform2D a = test::random_transform(rng, 400), b = test::random_transform(rng, 400);
    const double e = registration_error(a, b, 300, 500);
    CHECK(std::abs(e - corner_oracle(a, b, 300, 500)) < 1e-9);
    // Corner order does not matter.
    auto cs = corners(300, 500);
    std::reverse(cs.begin(), cs.end());
    std::swap(cs[0], cs[2]);
    double sum = 0.0;
    for (const Point2D& p : cs) sum += (apply_rigid(a, p) - apply_rigid(b, p)).norm();
    CHECK(std::abs(e - sum / 4.0) < 1e-9);
    // Pure translations displace every corner equally.
    const RigidTransform2D t = RigidTransform2D::pure_translation(a.translation.x(), a.translation.y());
    CHECK(std::abs(registration_error(id, t, 300, 500) - a.translation.norm()) < 1e-9);
  }
}

TEST_CASE("image_corners") {
  const auto c = image_corners(10, 20);
  REQUIRE(c.size() == 4);
  CHECK(c[0] == Point2D(0, 0));
  CHECK(c[1] == Point2D(19, 0));
  CHECK(c[2] == Point2D(19, 9));
  CHECK(c[3] == Point2D(0, 9));
}

TEST_CASE("generate_eval_transforms") {
  const EvalProtocol full;

  SUBCASE("quotas of the 134-pair protocol are met exactly") {
    const auto ts = generate_eval_transforms(134, {44, 45, 45}, 7, 834, 834, full);
    REQUIRE(ts.size() == 134);
    int n[3] = {0, 0, 0};
    for (const auto& t : ts) ++n[int(t.stratum)];
    CHECK(n[0] == 44);
    CHECK(n[1] == 45);
    CHECK(n[2] == 45);
    CHECK(std::is_sorted(ts.begin(), ts.end(), [](const auto& a, const auto& b) { return a.stratum < b.stratum; }));
  }

  SUBCASE("every stratum re-derives from its displacement") {
    const EvalProtocol p = full.scaled_to(256);
    const auto ts = generate_eval_transforms(50, {16, 17, 17}, 11, 256, 256, p);
    const Point2D c(127.5, 127.5);
    for (const auto& t : ts) {
      CHECK(t.transform.center == c);
      CHECK(std::abs(t.transform.angle) <= 30.0 * std::numbers::pi / 180.0);
      CHECK(std::abs(t.transform.translation.x()) <= p.max_translation);
      CHECK(std::abs(t.transform.translation.y()) <= p.max_translation);
      const double d = corner_oracle(RigidTransform2D{}, t.transform, 256, 256);
      CHECK(std::abs(d - t.displacement) < 1e-9);
      const Stratum s = d <= p.small_limit ? Stratum::small : d <= p.medium_limit ? Stratum::medium : Stratum::large;
      CHECK(s == t.stratum);
    }
  }

  SUBCASE("deterministic per seed") {
    const auto a = generate_eval_transforms(6, {2, 2, 2}, 5, 834, 834, full);
    const auto b = generate_eval_transforms(6, {2, 2, 2}, 5, 834, 834, full);
    const auto c = generate_eval_transforms(6, {2, 2, 2}, 6, 834, 834, full);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].transform.angle == b[i].transform.angle);
      CHECK(a[i].transform.translation == b[i].transform.translation);
      differs |= a[i].transform.angle != c[i].transform.angle;
    }
    CHECK(differs);
  }

  SUBCASE("edge cases") {
    CHECK(generate_eval_transforms(0, {0, 0, 0}, 1, 834, 834, full).empty());
    CHECK_THROWS_AS(generate_eval_transforms(5, {1, 1, 1}, 1, 834, 834, full), EvalError);
    EvalProtocol tight = full;
    tight.max_rotation_deg = 0.0;
    tight.max_translation = 10.0;
    CHECK_THROWS_AS(generate_eval_transforms(1, {0, 0, 1}, 1, 834, 834, tight), EvalError);
    CHECK_THROWS_AS(generate_eval_transforms(1, {0, 1, 0}, 1, 834, 834, tight), EvalError);
  }
}

TEST_CASE("EvalProtocol scaling and classification") {
  const EvalProtocol p = EvalProtocol{}.scaled_to(417);
  CHECK(p.max_translation == doctest::Approx(50.0));
  CHECK(p.small_limit == doctest::Approx(50.0));
  CHECK(p.medium_limit == doctest::Approx(100.0));
  CHECK(p.failure_threshold == doctest::Approx(50.0));
  CHECK(p.max_rotation_deg == 30.0);
  const EvalProtocol q;
  CHECK(q.classify(100.0) == Stratum::small);
  CHECK(q.classify(100.5) == Stratum::medium);
  CHECK(q.classify(200.0) == Stratum::medium);
  CHECK(q.classify(200.5) == Stratum::large);
  EvalProtocol bad;
  bad.medium_limit = 50;
  CHECK_THROWS_AS(bad.validate(), EvalError);
}

TEST_CASE("ecdf") {
  const ECDFCurve one = ecdf({0.0}, 100.0);
  CHECK(one.errors == std::vector<double>{0.0});
  CHECK(one.fractions == std::vector<double>{1.0});
  CHECK(one.fraction_below(0.0) == 0.0);
  CHECK(one.fraction_below(1e-12) == 1.0);

  CHECK(ecdf({10, 10, 200}, 100.0).success_fraction == doctest::Approx(2.0 / 3.0));

  std::mt19937_64 rng(8);
  std::exponential_distribution<double> ex(0.02);
  std::vector<double> e;
  for (int i = 0; i < 97; ++i) e.push_back(i % 13 == 0 ? kFailedRegistration : ex(rng));
  const ECDFCurve c = ecdf(e, 100.0, 834.0);
  std::vector<double> sorted = e;
  std::sort(sorted.begin(), sorted.end());
  CHECK(c.errors == sorted);
  CHECK(c.scale == 834.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(c.fractions[i] == doctest::Approx((i + 1) / 97.0));
  for (const double x : {0.0, 5.0, 50.0, 100.0, 1e9}) {
    const double count = double(std::count_if(e.begin(), e.end(), [&](double v) { return v < x; }));
    CHECK(c.fraction_below(x) == doctest::Approx(count / 97.0));
  }
  CHECK(c.success_fraction == doctest::Approx(c.fraction_below(100.0)));
  CHECK(c.fraction_below(std::numeric_limits<double>::max()) < 1.0);  // failures never count
}

TEST_CASE("success_counts") {
  const SuccessCounts zero = success_counts(std::vector<double>(5, 0.0), 834);
  CHECK(zero.trials == 5);
  CHECK(zero.below_1pct == 5);
  CHECK(zero.below_5pct == 5);
  CHECK(zero.below_abs == 5);
  CHECK(zero.threshold_1pct == 9);
  CHECK(zero.threshold_5pct == 42);
  CHECK(success_counts({}, 800).threshold_1pct == 8);
  CHECK(success_counts({}, 800).threshold_5pct == 40);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 150);
  std::vector<double> e{9.0, 8.999, 42.0, 41.5, 100.0, kFailedRegistration};
  for (int i = 0; i < 200; ++i) e.push_back(std::round(u(rng) * 4) / 4);
  const SuccessCounts s = success_counts(e, 834, 100.0);
  int a = 0, b = 0, c = 0;
  for (const double v : e) {
    a += v < 9.0;
    b += v < 42.0;
    c += v < 100.0;
  }
  CHECK(s.trials == int(e.size()));
  CHECK(s.below_1pct == a);
  CHECK(s.below_5pct == b);
  CHECK(s.below_abs == c);
  CHECK_THROWS_AS(success_counts({std::nan("")}, 834), EvalError);
}

TEST_CASE("timing_report") {
  CHECK(timing_report({}).empty());
  const auto rows = timing_report({{"train", "model", 12.5},
                                   {"register", "pair0", 1.25},
                                   {"register", "pair1", 0.75},
                                   {"register", "pair0", 0.5},
                                   {"train", "model", 0.5}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].stage == "train");
  CHECK(rows[0].total_seconds == 13.0);
  CHECK(rows[0].items == 1);
  CHECK(rows[0].seconds_per_item == 13.0);
  CHECK(rows[1].stage == "register");
  CHECK(rows[1].total_seconds == 2.5);
  CHECK(rows[1].items == 2);
  CHECK(rows[1].seconds_per_item == 1.25);
  CHECK(timing_csv(rows) ==
        "stage,total_seconds,items,seconds_per_item\ntrain,13.000000,1,13.000000\nregister,2.500000,2,1.250000\n");
}

TEST_CASE("make_eval_pair") {
  const Image src = synthetic_texture(200, 200, 9);
  // Integer shifts make reference(p) == floating(t(p)) exact.
  const RigidTransform2D t{0.0, Point2D(3, -2), Point2D(31.5, 31.5)};
  const EvalPair pair = make_eval_pair(src, t, 64);
  for (int y = 2; y < 64; ++y) {
    for (int x = 0; x < 61; ++x) CHECK(pair.reference.at(0, y, x) == doctest::Approx(pair.floating.at(0, y - 2, x + 3)));
  }
  // A quarter turn about the centre is a pixel permutation.
  const EvalPair quarter = make_eval_pair(src, RigidTransform2D{std::numbers::pi / 2, Point2D::Zero(), Point2D(31.5, 31.5)}, 64);
  for (int y = 0; y < 64; y += 5) {
    for (int x = 0; x < 64; x += 5) {
      const Point2D q = apply_rigid(RigidTransform2D{std::numbers::pi / 2, Point2D::Zero(), Point2D(31.5, 31.5)}, Point2D(x, y));
      CHECK(quarter.reference.at(0, y, x) ==
            doctest::Approx(quarter.floating.at(0, int(std::lround(q.y())), int(std::lround(q.x())))).epsilon(1e-5));
    }
  }
  const EvalPair id = make_eval_pair(src, RigidTransform2D{}, 64);
  CHECK(id.reference == id.floating);
  CHECK_THROWS_AS(make_eval_pair(src, RigidTransform2D::pure_translation(90, 0), 64), EvalError);
  CHECK_THROWS_AS(make_eval_pair(src, RigidTransform2D{}, 300), EvalError);
}
