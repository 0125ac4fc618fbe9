#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "comir/cli.hpp"
#include "comir/data.hpp"
#include "comir/image_io.hpp"
#include "comir/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace comir;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = COMIR_FIXTURE_DIR;

const fs::path& root() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "comir_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const fs::path smoke = kFixtures / "smoke.ini";

// Trains once; later cases reuse the checkpoint.
const fs::path& checkpoint() {
  static const fs::path ckpt = [] {
    const Run r = run({"train", "--config", smoke.string(), "--out", (root() / "train").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return root() / "train" / "checkpoint.ckpt";
  }();
  return ckpt;
}

}  // namespace

TEST_CASE("train smoke") {
  ::unsetenv(kSeedEnvironmentVariable);
  const fs::path& ckpt = checkpoint();
  CHECK(fs::is_regular_file(ckpt));
  const fs::path dir = ckpt.parent_path();
  const std::string loss = slurp(dir / "loss.csv");
  CHECK(loss.rfind("step,", 0) == 0);
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 3);  // header + 2 steps
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["version"] == kToolVersion);
  CHECK(manifest.contains("seeds"));
  CHECK(manifest["config"].get<std::string>().find("[train]") != std::string::npos);
  bool hashed = false;
  for (const auto& o : manifest["outputs"]) hashed |= o["path"].get<std::string>().ends_with("checkpoint.ckpt");
  CHECK(hashed);
  CHECK(fs::is_regular_file(dir / "timing.csv"));
}

TEST_CASE("register needs a checkpoint for CoMIR inputs") {
  const Run r = run({"register", "--config", smoke.string(), "--ref-modality", "A", "--out",
                     (root() / "nockpt").string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("checkpoint") != std::string::npos);
  CHECK_FALSE(fs::exists(root() / "nockpt"));
}

TEST_CASE("register then evaluate twice") {
  const fs::path reg = root() / "register";
  const Run r = run({"register", "--config", smoke.string(), "--ref-modality", "A", "--checkpoint",
                     checkpoint().string(), "--out", reg.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::ifstream in(reg / "registrations.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line);) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.contains("method"));
    CHECK(rec.contains("error"));
    ++lines;
  }
  CHECK(lines == 9);  // 3 pairs x 3 methods

  const Run e1 = run({"evaluate", "--results", reg.string(), "--out", (root() / "eval1").string()});
  const Run e2 = run({"evaluate", "--results", reg.string(), "--out", (root() / "eval2").string()});
  REQUIRE_MESSAGE(e1.code == 0, e1.err);
  REQUIRE_MESSAGE(e2.code == 0, e2.err);
  const std::string s1 = slurp(root() / "eval1" / "summary.json");
  CHECK_FALSE(s1.empty());
  CHECK(s1 == slurp(root() / "eval2" / "summary.json"));
  CHECK(fs::is_regular_file(root() / "eval1" / "per_pair.csv"));
  CHECK(fs::is_regular_file(root() / "eval1" / "ecdf_mi.csv"));
}

TEST_CASE("infer and equivariance") {
  const fs::path in = root() / "images";
  fs::create_directories(in);
  const MultimodalSample s = synthetic_sample("x", 64, 2, 0.05);
  write_image(in / "a.tif", s.images[0]);
  const Run r = run({"infer", "--checkpoint", checkpoint().string(), "--input", in.string(), "--out",
                     (root() / "infer").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::is_regular_file(root() / "infer" / "a.tif"));
  CHECK(fs::is_regular_file(root() / "infer" / "a.png"));

  const Run q = run({"equivariance", "--checkpoint", checkpoint().string(), "--image", (in / "a.tif").string(),
                     "--step", "45", "--out", (root() / "eqv").string()});
  REQUIRE_MESSAGE(q.code == 0, q.err);
  const std::string csv = slurp(root() / "eqv" / "equivariance.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 0..315
}

TEST_CASE("reproduce records every stage") {
  const Run r = run({"reproduce", "--config", smoke.string(), "--out", (root() / "repro").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::is_regular_file(root() / "repro" / "summary.json"));
  const std::string timing = slurp(root() / "repro" / "timing.csv");
  for (const char* stage : {"\ntrain,", "\ninfer,", "\nregister,"}) CHECK_MESSAGE(timing.find(stage) != std::string::npos, stage);
}

TEST_CASE("argument and configuration errors") {
  CHECK(run({"train"}).code == kExitConfig);
  CHECK(run({"frobnicate"}).code == kExitConfig);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"train", "--config", (kFixtures / "typo.ini").string(), "--out", (root() / "typo").string()}).code ==
        kExitConfig);
  CHECK(run({"--help"}).code == kExitOk);
  const Run v = run({"validate", "--config", smoke.string()});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find("batch_size") != std::string::npos);
  // Run directories are write-once.
  CHECK(run({"train", "--config", smoke.string(), "--out", (root() / "train").string()}).code == kExitConfig);
  CHECK(run({"infer", "--checkpoint", (root() / "nope.ckpt").string(), "--input", root().string(), "--out",
             (root() / "bad_infer").string()})
            .code != kExitOk);
}
