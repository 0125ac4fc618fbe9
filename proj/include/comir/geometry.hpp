#pragma once

// Rigid 2-D geometry. Coordinates are raster-oriented: x grows to the right,
// y grows downward, and a positive angle rotates counter-clockwise as drawn
// with the usual math convention on (x, y).

#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace comir {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

using Point2D = Point2<double>;

/// Rotation by `angle` about `center`, followed by `translation`.
///
/// Maps p to R(angle) * (p - center) + center + translation.
template <typename Scalar>
struct RigidTransform2 {
  Scalar angle{0};
  Point2<Scalar> translation{Point2<Scalar>::Zero()};
  Point2<Scalar> center{Point2<Scalar>::Zero()};

  static RigidTransform2 identity(const Point2<Scalar>& pivot = Point2<Scalar>::Zero()) {
    return {Scalar(0), Point2<Scalar>::Zero(), pivot};
  }

  static RigidTransform2 pure_translation(Scalar tx, Scalar ty) {
    return {Scalar(0), Point2<Scalar>(tx, ty), Point2<Scalar>::Zero()};
  }

  Eigen::Matrix<Scalar, 2, 2> rotation() const {
    using std::cos;
    using std::sin;
    Eigen::Matrix<Scalar, 2, 2> r;
    r << cos(angle), -sin(angle), sin(angle), cos(angle);
    return r;
  }

  /// Affine offset b such that the map is p -> R p + b.
  Point2<Scalar> offset() const { return center - rotation() * center + translation; }

  /// Same mapping, expressed about a different pivot.
  RigidTransform2 about(const Point2<Scalar>& pivot) const {
    RigidTransform2 out{angle, Point2<Scalar>::Zero(), pivot};
    out.translation = offset() - pivot + rotation() * pivot;
    return out;
  }

  template <typename Other>
  RigidTransform2<Other> cast() const {
    return {Other(angle), translation.template cast<Other>(), center.template cast<Other>()};
  }

  bool is_finite() const {
    using std::isfinite;
    return isfinite(angle) && translation.allFinite() && center.allFinite();
  }
};

using RigidTransform2D = RigidTransform2<double>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi_v<Scalar>) a += two_pi;
  if (a > std::numbers::pi_v<Scalar>) a -= two_pi;
  return a;
}

template <typename Scalar>
Point2<Scalar> apply_rigid(const RigidTransform2<Scalar>& t, const Point2<Scalar>& p) {
  return t.rotation() * (p - t.center) + t.center + t.translation;
}

/// compose(t1, t2) applies t2 first, then t1. The result uses t2's pivot.
template <typename Scalar>
RigidTransform2<Scalar> compose(const RigidTransform2<Scalar>& t1, const RigidTransform2<Scalar>& t2) {
  const Eigen::Matrix<Scalar, 2, 2> r1 = t1.rotation();
  const Point2<Scalar> b = r1 * t2.offset() + t1.offset();
  RigidTransform2<Scalar> out;
  out.angle = wrap_angle(t1.angle + t2.angle);
  out.center = t2.center;
  out.translation = b - out.center + out.rotation() * out.center;
  return out;
}

template <typename Scalar>
RigidTransform2<Scalar> invert(const RigidTransform2<Scalar>& t) {
  // p = R (q - c) + c + t  =>  q = R^T (p - c - t) + c, pivot kept.
  RigidTransform2<Scalar> out;
  out.angle = wrap_angle(-t.angle);
  out.center = t.center;
  out.translation = -(t.rotation().transpose() * t.translation);
  return out;
}

/// Element of the cyclic group of quarter turns; k counter-clockwise 90 degree steps.
class C4Element {
 public:
  constexpr C4Element() = default;
  constexpr explicit C4Element(int k) : k_(((k % 4) + 4) % 4) {}

  constexpr int k() const { return k_; }
  constexpr C4Element inverse() const { return C4Element(-k_); }
  constexpr bool is_identity() const { return k_ == 0; }
  double angle() const { return k_ * std::numbers::pi / 2.0; }

  friend constexpr C4Element operator*(C4Element a, C4Element b) { return C4Element(a.k_ + b.k_); }
  friend constexpr bool operator==(C4Element a, C4Element b) = default;

 private:
  int k_ = 0;
};

}  // namespace comir
