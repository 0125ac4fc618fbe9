#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "comir/equivariance.hpp"
#include "comir/filters.hpp"
#include "comir/synthetic.hpp"
#include "test_helpers.hpp"

using namespace comir;

TEST_CASE("image_pearson") {
  const Image a = test::random_image(2, 10, 10, 1);
  Image neg = a;
  neg.pixels() *= -1.0f;
  CHECK(image_pearson(a, a) == doctest::Approx(1.0));
  CHECK(image_pearson(a, neg) == doctest::Approx(-1.0));
  Image flat(2, 10, 10);
  CHECK_THROWS(image_pearson(flat, a));
  // Masked: only the kept pixels matter.
  Image mask(1, 10, 10);
  mask.pixels().setOnes();
  mask.at(0, 0, 0) = 0.0f;
  Image b = a;
  b.at(0, 0, 0) = 100.0f;
  b.at(1, 0, 0) = -100.0f;
  CHECK(image_pearson(a, b, &mask) == doctest::Approx(1.0));
}

TEST_CASE("equivariance curve of the identity model") {
  const Image img = gaussian_blur(synthetic_texture(96, 96, 3), 1.0);
  const EquivarianceCurve c = equivariance_curve([](const Image& x) { return x; }, img, 15.0);
  REQUIRE(c.angles.size() == 24);
  CHECK(c.angles.front() == 0.0);
  for (std::size_t i = 1; i < c.angles.size(); ++i) CHECK(c.angles[i] > c.angles[i - 1]);
  for (std::size_t i = 0; i < c.angles.size(); ++i) {
    if (std::fmod(c.angles[i], 90.0) == 0.0) {
      CHECK(c.correlations[i] == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(c.correlations[i] >= 0.99);
    }
  }
  CHECK_THROWS(equivariance_curve([](const Image& x) { return x; }, img, 7.0));
  CHECK_THROWS(equivariance_curve([](const Image& x) { return x; }, test::random_image(1, 10, 12, 1), 90.0));
}

TEST_CASE("a direction-dependent model loses correlation off the C4 angles") {
  const Image img = gaussian_blur(synthetic_texture(96, 96, 5), 1.0);
  auto edges = [](const Image& x) { return gradient_magnitude(x); };
  auto ramp = [](const Image& x) {
    Image out = x;
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) out.at(0, y, xx) += 0.02f * xx;
    }
    return out;
  };
  const EquivarianceCurve a = equivariance_curve(edges, img, 45.0);
  const EquivarianceCurve b = equivariance_curve(ramp, img, 45.0);
  CHECK(b.correlations[1] < a.correlations[1]);
}

TEST_CASE("pairwise correlation experiment") {
  const Image a = test::random_image(1, 12, 12, 1);
  const CorrelationReport same = pairwise_correlation_experiment({a, a, a}, 4, 2000);
  CHECK(same.mean == doctest::Approx(1.0));
  CHECK(same.lo == doctest::Approx(1.0));
  CHECK(same.hi == doctest::Approx(1.0));
  CHECK(same.pairs == 3);

  const Image b = test::random_image(1, 12, 12, 2), c = test::random_image(1, 12, 12, 3);
  const CorrelationReport r = pairwise_correlation_experiment({a, b, c}, 4, 2000);
  const double hand = (image_pearson(a, b) + image_pearson(a, c) + image_pearson(b, c)) / 3.0;
  CHECK(r.mean == doctest::Approx(hand).epsilon(1e-12));
  REQUIRE(r.values.size() == 3);
  CHECK(r.values[0] == doctest::Approx(image_pearson(a, b)));
  CHECK(r.lo <= r.mean);
  CHECK(r.mean <= r.hi);
  CHECK_THROWS(pairwise_correlation_experiment({a}, 1));
  CHECK_THROWS(pairwise_correlation_experiment({a, test::random_image(1, 12, 13, 1)}, 1));
}

TEST_CASE("rotate_content agrees with rotate_c4 at quarter turns") {
  const Image img = test::random_image(1, 20, 20, 6);
  const Image r = rotate_content(img, std::numbers::pi / 2);
  const Image e = rotate_c4(img, C4Element(1));
  CHECK((r.pixels() - e.pixels()).cwiseAbs().maxCoeff() < 1e-5f);
}
