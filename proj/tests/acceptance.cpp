// Acceptance checks, one per invocation: `acceptance <criterion>` prints a
// single PASS/FAIL line (plus any details above it) and exits non-zero on FAIL.

#include "comir/cli.hpp"
#include "comir/data.hpp"
#include "comir/encoder.hpp"
#include "comir/equivariance.hpp"
#include "comir/eval.hpp"
#include "comir/loss.hpp"
#include "comir/registration/registration.hpp"
#include "comir/seed.hpp"
#include "comir/stats.hpp"
#include "comir/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace comir;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---------------------------------------------------------------- loss

LatentBatch<double> gaussian_batch(int n, int dim, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  LatentBatch<double> b;
  b.modalities = 2;
  b.tuples = n;
  b.channels = channels;
  b.z.resize(2 * n, dim);
  for (Eigen::Index i = 0; i < b.z.size(); ++i) b.z.data()[i] = g(rng);
  return b;
}

Eigen::MatrixXd bilinear_weights() {
  Eigen::MatrixXd w(2, 2);
  w << 1.0, 0.3, -0.2, 0.8;
  return w;
}

Outcome loss_closed_form() {
  // Identical latents make every critic value, hence every similarity, equal.
  double worst = 0.0;
  for (const int n : {2, 4, 8}) {
    for (const CriticSpec& spec : {CriticSpec::mse(), CriticSpec::cosine(), CriticSpec::bilinear(bilinear_weights())}) {
      LatentBatch<double> b = gaussian_batch(n, 6, 2, 1);
      for (Eigen::Index r = 1; r < b.z.rows(); ++r) b.z.row(r) = b.z.row(0);
      worst = std::max(worst, std::abs(infonce_loss(b, spec, 0.5) - std::log(2.0 * n - 1.0)));
    }
  }
  return {worst < 1e-9, fmt("max |loss - log(2n-1)| = %.3g over n in {2,4,8} and 3 critics", worst)};
}

Outcome loss_gradient() {
  double worst = 0.0;
  for (const CriticSpec& spec : {CriticSpec::mse(), CriticSpec::cosine(), CriticSpec::bilinear(bilinear_weights())}) {
    // 2 modalities x 2 tuples x 3 values = 12 latent elements.
    const int channels = spec.kind == CriticKind::bilinear ? 2 : 1;
    const int dim = spec.kind == CriticKind::bilinear ? 2 : 3;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const LatentBatch<double> b = gaussian_batch(2, dim, channels, seed);
      const LossGradient<double> g = infonce_loss_with_gradient(b, spec, 0.5);
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < b.z.size(); ++i) {
        LatentBatch<double> up = b, dn = b;
        up.z.data()[i] += h;
        dn.z.data()[i] -= h;
        const double fd = (infonce_loss(up, spec, 0.5) - infonce_loss(dn, spec, 0.5)) / (2 * h);
        const double an = g.dz.data()[i];
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
      }
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g over 3 critics x 5 batches", worst)};
}

// ---------------------------------------------------------------- training

TrainConfig desk_training(std::uint64_t seed, Group group) {
  TrainConfig t;
  t.optimizer = OptimizerKind::adam;
  t.learning_rate = 1e-3;
  t.weight_decay = 1e-4;
  t.activation_decay_l1 = 0.0;
  t.activation_decay_l2 = 0.0;
  t.batch_size = 8;
  t.patch_size = 128;
  t.steps_per_epoch = 200;
  t.epochs = 1;
  t.group = group;
  t.seed = seed;
  return t;
}

MultimodalSample training_image() { return synthetic_sample("train", 320, 7, 0.05); }

ComirModel train_desk(std::uint64_t seed, Group group, int channels = 1) {
  const auto t0 = Clock::now();
  const EncoderConfig e = EncoderConfig::desk(1, channels);
  ComirModel m = train({training_image()}, {"A", "B"}, {e, e}, desk_training(seed, group), AugmentationConfig{});
  std::cout << "  trained seed " << seed << " group " << to_string(group) << " in "
            << fmt("%.0f", seconds_since(t0)) << " s\n";
  return m;
}

double tail_mean(const ComirModel& m, int count) {
  double s = 0.0;
  for (std::size_t i = m.history.size() - std::size_t(count); i < m.history.size(); ++i) s += m.history[i].loss;
  return s / count;
}

Outcome desk_training_loss() {
  const auto t0 = Clock::now();
  const ComirModel m = train_desk(1, Group::c4);
  const double tail = tail_mean(m, 20), bound = 0.5 * std::log(15.0), secs = seconds_since(t0);
  return {tail < bound && secs <= 600.0,
          fmt("final 20-step mean loss %.4f (bound %.4f, initial %.4f), %.0f s (limit 600)", tail, bound,
              m.history.front().loss, secs)};
}

Image held_out(int which, int modality) {
  Image img = synthetic_sample("held", 128, 99 + std::uint64_t(which), 0.05).images[std::size_t(modality)];
  img.set_modality("");
  return img;
}

std::string curve_text(const EquivarianceCurve& c) {
  std::string s;
  for (std::size_t i = 0; i < c.angles.size(); ++i) s += fmt(" %g:%.4f", c.angles[i], c.correlations[i]);
  return s;
}

Outcome equivariance() {
  const auto t0 = Clock::now();
  ComirModel c4 = train_desk(1, Group::c4);
  ComirModel plain = train_desk(1, Group::trivial);
  const Image img = held_out(0, 0);
  const EquivarianceCurve a = equivariance_curve([&](const Image& x) { return infer_comir(c4, "A", x); }, img, 15.0);
  const EquivarianceCurve b = equivariance_curve([&](const Image& x) { return infer_comir(plain, "A", x); }, img, 15.0);
  std::cout << "  C4 curve:           " << curve_text(a) << "\n  unconstrained curve:" << curve_text(b) << "\n";
  const double min_c4 = *std::min_element(a.correlations.begin(), a.correlations.end());
  double at45_a = 0, at45_b = 0;
  for (std::size_t i = 0; i < a.angles.size(); ++i) {
    if (std::abs(a.angles[i] - 45.0) < 1e-9) at45_a = a.correlations[i], at45_b = b.correlations[i];
  }
  const double secs = seconds_since(t0);
  return {min_c4 >= 0.8 && at45_b < at45_a && secs <= 900.0,
          fmt("C4 minimum %.4f (>= 0.8); at 45 deg C4 %.4f vs unconstrained %.4f; %.0f s (limit 900)", min_c4,
              at45_a, at45_b, secs)};
}

Outcome reproducibility() {
  const auto t0 = Clock::now();
  // Three-channel CoMIRs: with one channel the only ambiguity between runs is
  // the sign, which makes the different-seed comparison a coin flip.
  ComirModel a = train_desk(1, Group::c4, 3);
  ComirModel a2 = train_desk(1, Group::c4, 3);
  ComirModel c = train_desk(2, Group::c4, 3);
  double same = 0.0, diff = 0.0;
  int count = 0;
  for (int which = 0; which < 2; ++which) {
    for (int m = 0; m < 2; ++m) {
      const std::string name = m == 0 ? "A" : "B";
      const Image img = held_out(which, m);
      const Image ra = infer_comir(a, name, img);
      same += image_pearson(ra, infer_comir(a2, name, img));
      diff += image_pearson(ra, infer_comir(c, name, img));
      ++count;
    }
  }
  same /= count;
  diff /= count;
  const double secs = seconds_since(t0);
  return {same >= 0.9 && diff <= 0.5 && secs <= 1200.0,
          fmt("held-out correlation same seed %.4f (>= 0.9), different seeds %.4f (<= 0.5); %.0f s (limit 1200)",
              same, diff, secs)};
}

// ---------------------------------------------------------------- registration

struct SyntheticRun {
  std::vector<EvalTransform> transforms;
  std::vector<double> feature, intensity, mi;
};

constexpr int kPairSize = 256;

SyntheticRun synthetic_registrations(bool with_intensity) {
  const EvalProtocol protocol = EvalProtocol{}.scaled_to(kPairSize);
  SyntheticRun run;
  run.transforms = generate_eval_transforms(50, {16, 17, 17}, 7, kPairSize, kPairSize, protocol);
  const MethodConfigs cfg;
  for (std::size_t i = 0; i < run.transforms.size(); ++i) {
    const RigidTransform2D& t = run.transforms[i].transform;
    const Image src = synthetic_texture(448, 448, derive_seed(7, "texture", i));
    const EvalPair pair = make_eval_pair(src, t, kPairSize);
    const std::uint64_t seed = derive_seed(7, "register", i);
    auto error = [&](const RegistrationResult& r) {
      return r.success ? registration_error(t, r.transform, kPairSize, kPairSize) : kFailedRegistration;
    };
    run.feature.push_back(error(register_features(pair.reference, pair.floating, cfg.feature, seed)));
    run.mi.push_back(error(register_mi(pair.reference, pair.floating, cfg.mi, seed)));
    if (with_intensity) {
      run.intensity.push_back(error(register_multistart(
          Method::intensity, pair.reference, pair.floating,
          rotation_starts(pair.reference, cfg.intensity.start_rotations), cfg, seed)));
    }
  }
  return run;
}

int count_below(const std::vector<double>& e, double bound, std::size_t from = 0, std::size_t to = SIZE_MAX) {
  int n = 0;
  for (std::size_t i = from; i < std::min(to, e.size()); ++i) n += e[i] < bound;
  return n;
}

Outcome registration_recovery() {
  const auto t0 = Clock::now();
  const SyntheticRun run = synthetic_registrations(true);
  std::size_t small = 0;
  while (small < run.transforms.size() && run.transforms[small].stratum == Stratum::small) ++small;
  const int f = count_below(run.feature, 2.0), in = count_below(run.intensity, 5.0);
  const int m = count_below(run.mi, 5.0, 0, small);
  const double secs = seconds_since(t0);
  const bool pass = f >= 45 && in >= 40 && m >= std::ceil(0.8 * double(small)) && secs <= 600.0;
  return {pass, fmt("feature < 2 px: %d/50 (need 45); intensity multistart < 5 px: %d/50 (need 40); "
                    "MI small stratum < 5 px: %d/%zu (need 80%%); %.0f s (limit 600)",
                    f, in, m, small, secs)};
}

Outcome displacement_correlation() {
  const SyntheticRun run = synthetic_registrations(false);
  std::vector<double> disp;
  for (const auto& t : run.transforms) disp.push_back(t.displacement);
  const double rho_mi = spearman(run.mi, disp), rho_feature = spearman(run.feature, disp);
  return {rho_mi > 0.4 && std::abs(rho_feature) < 0.2,
          fmt("Spearman(error, displacement): MI %.3f (> 0.4), feature %.3f (|.| < 0.2)", rho_mi, rho_feature)};
}

// ---------------------------------------------------------------- metrics

double wilcoxon_by_enumeration(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = int(a.size());
  std::vector<double> d, mags;
  for (int i = 0; i < n; ++i) {
    d.push_back(a[std::size_t(i)] - b[std::size_t(i)]);
    mags.push_back(std::abs(d.back()));
  }
  const std::vector<double> r = average_ranks(mags);
  double w = 0.0;
  for (int i = 0; i < n; ++i) w += d[std::size_t(i)] > 0 ? r[std::size_t(i)] : 0.0;
  int le = 0, ge = 0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (mask >> i & 1) ? r[std::size_t(i)] : 0.0;
    le += s <= w + 1e-9;
    ge += s >= w - 1e-9;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / double(1 << n));
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ang(-3.0, 3.0), pos(-500.0, 500.0), err(0.0, 300.0);

  double corner_gap = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const RigidTransform2D a{ang(rng), {pos(rng), pos(rng)}, {pos(rng), pos(rng)}};
    const RigidTransform2D b{ang(rng), {pos(rng), pos(rng)}, {pos(rng), pos(rng)}};
    const int h = 100 + k % 700, w = 100 + (k * 7) % 900;
    double sum = 0.0;
    for (const Point2D& c : {Point2D(0, 0), Point2D(w - 1, 0), Point2D(w - 1, h - 1), Point2D(0, h - 1)}) {
      sum += (apply_rigid(a, c) - apply_rigid(b, c)).norm();
    }
    corner_gap = std::max(corner_gap, std::abs(registration_error(a, b, h, w) - sum / 4.0));
  }

  bool ecdf_ok = true;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> e;
    for (int i = 0; i < 20 + k; ++i) e.push_back(i % 9 == 0 ? kFailedRegistration : std::round(err(rng)));
    const ECDFCurve c = ecdf(e, 100.0);
    std::vector<double> sorted = e;
    std::sort(sorted.begin(), sorted.end());
    ecdf_ok &= c.errors == sorted;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      ecdf_ok &= std::abs(c.fractions[i] - double(i + 1) / double(e.size())) < 1e-12;
    }
    for (const double x : {0.0, 10.0, 50.5, 100.0, 250.0}) {
      const auto n = std::count_if(e.begin(), e.end(), [&](double v) { return v < x; });
      ecdf_ok &= std::abs(c.fraction_below(x) - double(n) / double(e.size())) < 1e-12;
    }
    ecdf_ok &= std::abs(c.success_fraction - c.fraction_below(100.0)) < 1e-12;
  }

  const BinomialInterval ci = clopper_pearson(7, 134, 0.95);
  const bool cp_ok = ci.count_lo == 3 && ci.count_hi == 14;

  double wil_gap = 0.0;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> a, b;
    for (int i = 0; i < 6; ++i) {
      a.push_back(std::round(err(rng) / 10.0));
      b.push_back(std::round(err(rng) / 10.0));
      if (a.back() == b.back()) a.back() += 1.0;
    }
    wil_gap = std::max(wil_gap, std::abs(wilcoxon_signed_rank(a, b) - wilcoxon_by_enumeration(a, b)));
  }
  const double secs = seconds_since(t0);
  return {corner_gap < 1e-9 && ecdf_ok && cp_ok && wil_gap < 1e-12 && secs < 60.0,
          fmt("corner oracle gap %.2g; ecdf %s; Clopper-Pearson 7/134 -> [%lld; %lld]; Wilcoxon n=6 gap %.2g; %.1f s",
              corner_gap, ecdf_ok ? "matches" : "differs", ci.count_lo, ci.count_hi, wil_gap, secs)};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome determinism(const fs::path& config) {
  const fs::path base = fs::temp_directory_path() / "comir_acceptance_reproduce";
  fs::remove_all(base);
  std::string summaries[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path out = base / ("run" + std::to_string(k));
    std::ostringstream sink, err;
    const int code = dispatch({"reproduce", "--config", config.string(), "--out", out.string()}, sink, err);
    if (code != 0) return {false, "reproduce exited with " + std::to_string(code) + ": " + err.str()};
    summaries[k] = slurp(out / "summary.json");
  }
  const bool same = !summaries[0].empty() && summaries[0] == summaries[1];
  return {same, fmt("summary.json %s (%zu bytes)", same ? "byte-identical" : "differs", summaries[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <1-9> [reproduce-config]\n";
    return 2;
  }
  const int which = std::atoi(argv[1]);
  const char* names[] = {"",
                         "loss closed form",
                         "loss gradient",
                         "desk-scale training",
                         "equivariance",
                         "reproducibility",
                         "registration recovery",
                         "MI vs displacement",
                         "metric oracles",
                         "determinism"};
  if (which < 1 || which > 9) {
    std::cerr << "unknown criterion " << argv[1] << "\n";
    return 2;
  }
  Outcome o;
  try {
    switch (which) {
      case 1: o = loss_closed_form(); break;
      case 2: o = loss_gradient(); break;
      case 3: o = desk_training_loss(); break;
      case 4: o = equivariance(); break;
      case 5: o = reproducibility(); break;
      case 6: o = registration_recovery(); break;
      case 7: o = displacement_correlation(); break;
      case 8: o = metric_oracles(); break;
      case 9:
        if (argc < 3) {
          std::cerr << "criterion 9 needs a reproduce config\n";
          return 2;
        }
        o = determinism(argv[2]);
        break;
    }
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::cout << "criterion " << which << " (" << names[which] << "): " << (o.pass ? "PASS" : "FAIL") << " - "
            << o.detail << std::endl;
  return o.pass ? 0 : 1;
}
