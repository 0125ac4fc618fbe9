#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "comir/filters.hpp"
#include "comir/image.hpp"
#include "comir/image_io.hpp"
#include "test_helpers.hpp"

#include <filesystem>

using namespace comir;

TEST_CASE("apply_rigid: identity and quarter turn") {
  const Point2D p(5, 7);
  CHECK((apply_rigid(RigidTransform2D{}, p) - p).norm() == 0.0);
  RigidTransform2D q{std::numbers::pi / 2, {0, 0}, {0, 0}};
  const Point2D r = apply_rigid(q, Point2D(1, 0));
  CHECK(r.x() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.y() == doctest::Approx(1.0));
}

TEST_CASE("apply_rigid: 30 degrees about (417, 417) matches an explicit rotation matrix") {
  const double a = std::numbers::pi / 6;
  RigidTransform2D t{a, {0, 0}, {417, 417}};
  // Oracle: rotate (0,0) - c by the 2x2 matrix written out by hand.
  const double dx = -417, dy = -417;
  const double ex = std::cos(a) * dx - std::sin(a) * dy + 417;
  const double ey = std::sin(a) * dx + std::cos(a) * dy + 417;
  const Point2D r = apply_rigid(t, Point2D(0, 0));
  CHECK(std::abs(r.x() - ex) < 1e-9);
  CHECK(std::abs(r.y() - ey) < 1e-9);
}

TEST_CASE("compose and invert laws") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform2D t1 = test::random_transform(rng);
    const RigidTransform2D t2 = test::random_transform(rng);
    const RigidTransform2D c = compose(t1, t2);
    const RigidTransform2D id = compose(t1, invert(t1));
    std::uniform_real_distribution<double> box(-5000, 5000);
    for (int k = 0; k < 100; ++k) {
      const Point2D p(box(rng), box(rng));
      CHECK((apply_rigid(c, p) - apply_rigid(t1, apply_rigid(t2, p))).norm() < 1e-9);
      CHECK((apply_rigid(id, p) - p).norm() < 1e-9);
      CHECK((apply_rigid(compose(RigidTransform2D{}, t1), p) - apply_rigid(t1, p)).norm() < 1e-9);
    }
    CHECK(std::abs(id.angle) < 1e-12);
  }
  const RigidTransform2D tr = invert(RigidTransform2D::pure_translation(3, 4));
  CHECK(tr.translation.x() == doctest::Approx(-3));
  CHECK(tr.translation.y() == doctest::Approx(-4));
  CHECK(invert(RigidTransform2D{}).translation.norm() == 0.0);
}

TEST_CASE("apply_rigid is an isometry") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> box(-1000, 1000);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform2D t = test::random_transform(rng);
    const Point2D a(box(rng), box(rng)), b(box(rng), box(rng));
    CHECK(std::abs((apply_rigid(t, a) - apply_rigid(t, b)).norm() - (a - b).norm()) < 1e-9);
  }
}

TEST_CASE("C4 group laws hold for all 16 pairs") {
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      CHECK((C4Element(a) * C4Element(b)).k() == (a + b) % 4);
      CHECK((C4Element(a) * C4Element(b)) == (C4Element(b) * C4Element(a)));
    }
    CHECK((C4Element(a) * C4Element(a).inverse()).is_identity());
    CHECK((C4Element(a) * C4Element(0)) == C4Element(a));
  }
}

TEST_CASE("rotate_c4: identity, order four, 2x2 permutation") {
  const Image img = test::random_image(2, 5, 7, 1);
  CHECK(rotate_c4(img, C4Element(0)) == img);
  Image r = img;
  for (int i = 0; i < 4; ++i) r = rotate_c4(r, C4Element(1));
  CHECK(r == img);
  Image small(1, 2, 2);
  small.at(0, 0, 0) = 1;
  small.at(0, 0, 1) = 2;
  small.at(0, 1, 0) = 3;
  small.at(0, 1, 1) = 4;
  const Image h = rotate_c4(small, C4Element(2));
  CHECK(h.at(0, 0, 0) == 4);
  CHECK(h.at(0, 0, 1) == 3);
  CHECK(h.at(0, 1, 0) == 2);
  CHECK(h.at(0, 1, 1) == 1);
  CHECK(rotate_c4(img, C4Element(1)).height() == 7);
  CHECK_THROWS_AS(rotate_c4_shape_preserving(img, C4Element(1)), ImageError);
}

TEST_CASE("warp: identity, integer shift, C4 cross-check") {
  const Image img = test::ramp_image(16, 16);
  const WarpResult id = warp(img, RigidTransform2D{}, Interpolation::nearest);
  CHECK(id.image == img);
  CHECK(id.out_of_support_fraction == 0.0);

  const WarpResult shifted = warp(img, RigidTransform2D::pure_translation(1, 0), Interpolation::nearest);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 15; ++x) CHECK(shifted.image.at(0, y, x) == img.at(0, y, x + 1));
  }
  CHECK(shifted.out_of_support_fraction == doctest::Approx(16.0 / 256.0));

  const Image sq = test::random_image(1, 12, 12, 3);
  const Image exact = rotate_c4(sq, C4Element(1));
  const WarpResult lin = warp(sq, RigidTransform2D{-std::numbers::pi / 2, {0, 0}, sq.center()}, Interpolation::linear);
  for (int y = 1; y < 11; ++y) {
    for (int x = 1; x < 11; ++x) CHECK(std::abs(lin.image.at(0, y, x) - exact.at(0, y, x)) < 1e-6);
  }
}

TEST_CASE("warp followed by the inverse warp restores the interior") {
  const Image img = gaussian_blur(test::random_image(1, 64, 64, 9), 2.0);
  const RigidTransform2D t{0.2, {3.5, -2.25}, img.center()};
  const Image there = warp(img, t, Interpolation::linear).image;
  const Image back = warp(there, invert(t), Interpolation::linear).image;
  double worst = 0.0;
  for (int y = 20; y < 44; ++y) {
    for (int x = 20; x < 44; ++x) worst = std::max(worst, double(std::abs(back.at(0, y, x) - img.at(0, y, x))));
  }
  CHECK(worst <= 2.0 / 255.0);
}

TEST_CASE("image io round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "comir_test_io";
  std::filesystem::create_directories(dir);
  const Image img = test::random_image(3, 9, 11, 4);
  write_tiff(dir / "f.tif", img, SampleFormat::float32);
  CHECK(read_image(dir / "f.tif") == img);
  write_tiff(dir / "u16.tif", img, SampleFormat::uint16);
  const Image u16 = read_image(dir / "u16.tif");
  CHECK((u16.pixels() - img.pixels()).cwiseAbs().maxCoeff() <= 0.5f / 65535.0f + 1e-7f);
  write_png(dir / "p.png", img);
  const Image png = read_image(dir / "p.png");
  CHECK(png.channels() == 3);
  CHECK((png.pixels() - img.pixels()).cwiseAbs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
  std::filesystem::remove_all(dir);
}
