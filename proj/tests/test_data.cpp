#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "comir/data.hpp"
#include "comir/image_io.hpp"
#include "test_helpers.hpp"

#include <filesystem>

using namespace comir;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("four-channel file splits into NIR and RGB modalities") {
  TempDir dir("comir_test_multichannel");
  fs::create_directories(dir.path / "images");
  const Image img = test::random_image(4, 8, 10, 2);
  write_tiff(dir.path / "images" / "zh1.tif", img);
  const KeyValueDoc doc = KeyValueDoc::parse_string(
      "[layout]\nkind = multichannel\nmodalities = NIR, RGB\npattern = images/*.tif\n"
      "[NIR]\nchannels = 0\n[RGB]\nchannels = 3, 2, 1\n");
  const Dataset ds = load_dataset(dir.path, LayoutDescriptor::parse(doc));
  REQUIRE(ds.samples.size() == 1);
  const MultimodalSample& s = ds.samples.front();
  CHECK(s.id == "zh1");
  CHECK(s.images[0].channels() == 1);
  CHECK(s.images[1].channels() == 3);
  CHECK(s.images[1].at(0, 3, 4) == img.at(3, 3, 4));  // R is stored last
  CHECK(s.images[0].at(0, 3, 4) == img.at(0, 3, 4));
}

TEST_CASE("paired layout: ordering, empty directory, size mismatch") {
  TempDir dir("comir_test_paired");
  fs::create_directories(dir.path / "a");
  fs::create_directories(dir.path / "b");
  const KeyValueDoc doc = KeyValueDoc::parse_string(
      "[layout]\nkind = paired\nmodalities = BF, SHG\n[BF]\npattern = a/*_bf.tif\n[SHG]\npattern = b/*_shg.tif\nshg_log = true\n");
  const LayoutDescriptor layout = LayoutDescriptor::parse(doc);
  CHECK(load_dataset(dir.path, layout).samples.empty());

  for (const std::string id : {"s2", "s1"}) {
    write_tiff(dir.path / "a" / (id + "_bf.tif"), test::random_image(1, 6, 6, 1));
    write_tiff(dir.path / "b" / (id + "_shg.tif"), test::random_image(1, 6, 6, 2));
  }
  const Dataset ds = load_dataset(dir.path, layout);
  REQUIRE(ds.samples.size() == 2);
  CHECK(ds.samples[0].id == "s1");
  CHECK(ds.samples[1].id == "s2");
  CHECK(ds.samples[0].images[1].pixels().maxCoeff() <= float(std::log(2.0)) + 1e-6f);

  write_tiff(dir.path / "a" / "s3_bf.tif", test::random_image(1, 6, 6, 1));
  write_tiff(dir.path / "b" / "s3_shg.tif", test::random_image(1, 7, 6, 2));
  try {
    load_dataset(dir.path, layout);
    FAIL("expected a size mismatch");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("s3") != std::string::npos);
  }
  fs::remove(dir.path / "b" / "s3_shg.tif");
  CHECK_THROWS_AS(load_dataset(dir.path, layout), DatasetError);  // missing counterpart
}

TEST_CASE("split lists must be disjoint") {
  DatasetSplit split;
  split.train = {"a", "b"};
  split.test = {"b"};
  CHECK_THROWS(split.validate({"a", "b"}));
  split.test = {"c"};
  CHECK_THROWS(split.validate({"a", "b"}));  // c is not declared
  split.test = {};
  CHECK_NOTHROW(split.validate({"a", "b"}));
}

TEST_CASE("preprocess_shg") {
  CHECK(preprocess_shg(Image(1, 4, 4)).pixels().cwiseAbs().maxCoeff() == 0.0f);
  Image ones(1, 3, 3);
  ones.pixels().setOnes();
  CHECK(preprocess_shg(ones).at(0, 1, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  const Image r = test::random_image(1, 20, 20, 8);
  const Image p = preprocess_shg(r);
  Eigen::Index a, b, c, d;
  r.pixels().maxCoeff(&a, &b);
  p.pixels().maxCoeff(&c, &d);
  CHECK(b == d);
  for (Eigen::Index i = 1; i < r.pixels().size(); ++i) {
    const float x = r.pixels()(0, i - 1), y = r.pixels()(0, i);
    if (x < y) CHECK(p.pixels()(0, i - 1) < p.pixels()(0, i));
  }
  Image bad(1, 2, 2);
  bad.at(0, 0, 0) = 1.5f;
  CHECK_THROWS(preprocess_shg(bad));
}

TEST_CASE("extract_patch: crop oracle, quarter turn, border rejection") {
  const Image img = test::random_image(2, 40, 40, 3);
  // The patch centre (3.5, 3.5) lands on (20.5, 18.5): top-left pixel (17, 15).
  const Image p = extract_patch(img, Point2D(20.5, 18.5), 0.0, 8, 8, Interpolation::nearest);
  const Image direct = crop(img, 15, 17, 8, 8);
  CHECK(p == direct);

  const Image q = extract_patch(img, Point2D(19.5, 19.5), std::numbers::pi / 2, 10, 10, Interpolation::linear);
  // Sampling at +90 degrees turns the content by -90 degrees.
  const Image c = rotate_c4(crop(img, 15, 15, 10, 10), C4Element(-1));
  CHECK((q.pixels() - c.pixels()).cwiseAbs().maxCoeff() < 1e-6f);
  CHECK_THROWS_AS(extract_patch(img, Point2D(3, 3), 0.3, 16, 16, Interpolation::linear), FootprintError);
}

TEST_CASE("sample_batch: determinism, geometric consistency, no-op augmentation") {
  const MultimodalSample s = synthetic_sample("x", 160, 4, 0.05);
  const AugmentationConfig aug;
  const auto a = sample_batch({s}, 4, 32, aug, 99);
  const auto b = sample_batch({s}, 4, 32, aug, 99);
  REQUIRE(a.size() == 4);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t m = 0; m < 2; ++m) CHECK(a[k].patches[m] == b[k].patches[m]);
  }

  AugmentationConfig off = AugmentationConfig::none();
  off.flip_prob = 0.0;
  off.rotation_range = 0.0;
  off.channel_gain_prob = 0.0;
  off.interpolation_choices = {Interpolation::linear};
  const auto two = sample_batch({s}, 2, 24, off, 5);
  REQUIRE(two.size() == 2);
  for (const PatchTuple& t : two) {
    CHECK(t.orientation == 0.0);
    for (std::size_t m = 0; m < 2; ++m) {
      const Image raw = extract_patch(s.images[m], t.center, 0.0, 24, 24, Interpolation::linear);
      CHECK((raw.pixels() - t.patches[m].pixels()).cwiseAbs().maxCoeff() <= 2.0f / 255.0f);
    }
  }

  AugmentationConfig geo = AugmentationConfig::none();
  geo.flip_prob = 0.5;
  geo.rotation_range = std::numbers::pi;
  for (const PatchTuple& t : sample_batch({s}, 6, 24, geo, 17)) {
    // Both modalities must match the footprint under one shared flip.
    std::vector<int> matching;
    for (int f = 0; f < 4; ++f) {
      bool all = true;
      for (std::size_t m = 0; m < 2; ++m) {
        const Image raw = extract_patch(s.images[m], t.center, t.orientation, 24, 24, Interpolation::linear);
        Image flipped = raw;
        for (int y = 0; y < 24; ++y) {
          for (int x = 0; x < 24; ++x) {
            flipped.at(0, y, x) = raw.at(0, (f & 2) ? 23 - y : y, (f & 1) ? 23 - x : x);
          }
        }
        all = all && (flipped.pixels() - t.patches[m].pixels()).cwiseAbs().maxCoeff() <= 2.0f / 255.0f;
      }
      if (all) matching.push_back(f);
    }
    CHECK(!matching.empty());
  }
  CHECK_THROWS(sample_batch({s}, 1, 24, aug, 1));
}
