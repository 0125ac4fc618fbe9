#pragma once

#include "comir/registration/common.hpp"

#include <cstdint>
#include <optional>

namespace comir {

enum class ParzenWindow { box, bspline };

ParzenWindow parse_parzen_window(const std::string& name);
std::string to_string(ParzenWindow w);

struct MIConfig {
  int bins = 80;
  int spatial_samples = 500;
  double es_initial_radius = 1e-5;
  double es_min_radius = 1.5e-8;
  double es_growth = 1.0 + 1e-4;
  int max_iterations = 1500;
  ParzenWindow window = ParzenWindow::bspline;  // floating axis; the reference axis is always binned
  double min_overlap_fraction = 0.1;            // ES candidates overlapping less are rejected

  /// Shrink factor applied on rejection: growth^(-1/4).
  double es_shrink() const;

  /// Desk-scale preset: a search radius that moves at pixel scale within the
  /// iteration budget, and a coarser histogram that 500 samples can populate.
  static MIConfig desk();
  void validate() const;
};

/// Fixed sample positions over the reference grid: all pixels when the budget
/// covers the image, else a seeded draw without replacement.
std::vector<Point2D> mi_sample_positions(int height, int width, int samples, std::uint64_t seed);

/// Mattes-style MI estimator over fixed reference samples. Inputs are reduced
/// to one channel and min-max normalised once at construction.
class MattesMI {
 public:
  MattesMI(const Image& ref, const Image& flt, const MIConfig& cfg, std::uint64_t seed);

  /// MI in nats; nullopt when fewer than `min_samples` samples land inside flt.
  std::optional<double> evaluate(const RigidTransform2D& t, int min_samples = 1) const;
  int sample_count() const { return int(positions_.size()); }
  Point2D reference_center() const { return ref_center_; }
  double half_diagonal() const { return half_diagonal_; }

 private:
  MIConfig cfg_;
  Image flt_;
  std::vector<Point2D> positions_;
  std::vector<int> ref_bins_;
  Point2D ref_center_;
  double half_diagonal_ = 1.0;
};

/// MI of ref against flt sampled at t(p). Throws RegistrationError on empty overlap.
double mattes_mi(const Image& ref, const Image& flt, const RigidTransform2D& t, const MIConfig& cfg,
                 std::uint64_t seed);

/// (1+1)-ES over (angle * half-diagonal, tx, ty) about the reference centre,
/// starting at `init`. Returns the best transform seen; the trace holds the
/// best MI after every iteration (non-decreasing).
RegistrationResult register_mi(const Image& ref, const Image& flt, const MIConfig& cfg, std::uint64_t seed,
                               const RigidTransform2D& init = RigidTransform2D{});

}  // namespace comir
