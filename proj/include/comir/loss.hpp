#pragma once

// Contrastive objective over M modalities.
//
// Latents of one batch are stacked modality-major into Z (MN x D): row
// m * N + k holds the representation of tuple k in modality m. For anchor i
// and modality offset m in 1..M-1 the positive is (i + m N) mod MN. The
// softmax denominator keeps that positive and every index from other tuples;
// it drops the anchor itself and the remaining same-tuple positives.

#include "comir/image.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CriticKind { mse, cosine, bilinear };
enum class Reduction { mean, sum };
enum class Group { trivial, c4 };

CriticKind parse_critic(const std::string& name);
std::string to_string(CriticKind kind);
Group parse_group(const std::string& name);
std::string to_string(Group group);

struct CriticSpec {
  CriticKind kind = CriticKind::mse;
  Reduction reduction = Reduction::mean;
  /// Channel-mixing matrix of the bilinear critic (channels x channels). The
  /// critic is sum_p a_p^T W b_p / P over the P pixels; with a single pixel
  /// this is the plain flatten(a)^T W flatten(b).
  Eigen::MatrixXd bilinear_weights;

  static CriticSpec mse() { return {}; }
  static CriticSpec cosine() { return {CriticKind::cosine, Reduction::mean, {}}; }
  static CriticSpec bilinear(Eigen::MatrixXd w) { return {CriticKind::bilinear, Reduction::mean, std::move(w)}; }

  void validate(int channels) const;
};

struct LossConfig {
  double temperature = 0.5;
  Group group = Group::c4;
  int modalities = 2;

  void validate() const {
    if (!(temperature > 0.0)) throw LossError("temperature must be positive");
    if (modalities < 2) throw LossError("at least two modalities are required");
  }
};

/// Guard added to each norm of the cosine critic.
inline constexpr double kCosineEpsilon = 1e-8;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LatentBatch {
  MatrixX<Scalar> z;  // (modalities * tuples) x (channels * pixels)
  int modalities = 2;
  int tuples = 0;
  int channels = 1;

  Eigen::Index dim() const { return z.cols(); }
  Eigen::Index pixels() const { return z.cols() / channels; }
  int index(int modality, int tuple) const { return modality * tuples + tuple; }

  void validate() const {
    if (modalities < 2) throw LossError("latent batch needs at least two modalities");
    if (tuples < 2) throw LossError("latent batch needs at least two tuples (N >= 2) to form negatives");
    if (z.rows() != Eigen::Index(modalities) * tuples) throw LossError("latent batch row count must equal M * N");
    if (channels < 1 || z.cols() % channels != 0) throw LossError("latent width is not a multiple of the channel count");
  }
};

namespace detail {

template <typename Scalar>
using RowMajorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

/// h(y1, y2): -mean squared difference (or -sum), cosine similarity, or bilinear form.
template <typename Scalar, typename A, typename B>
Scalar critic_eval(const CriticSpec& spec, const Eigen::MatrixBase<A>& y1, const Eigen::MatrixBase<B>& y2,
                   int channels = 1) {
  if (y1.size() != y2.size()) {
    throw LossError("critic inputs differ in size (" + std::to_string(y1.size()) + " vs " +
                    std::to_string(y2.size()) + ")");
  }
  switch (spec.kind) {
    case CriticKind::mse: {
      const Scalar ss = (y1 - y2).squaredNorm();
      return spec.reduction == Reduction::mean ? -ss / Scalar(y1.size()) : -ss;
    }
    case CriticKind::cosine: {
      const Scalar n1 = y1.norm();
      const Scalar n2 = y2.norm();
      if (n1 < Scalar(kCosineEpsilon) && n2 < Scalar(kCosineEpsilon)) {
        throw LossError("cosine critic is undefined for two (near-)zero representations");
      }
      return y1.dot(y2) / ((n1 + Scalar(kCosineEpsilon)) * (n2 + Scalar(kCosineEpsilon)));
    }
    case CriticKind::bilinear: {
      const Eigen::Index pixels = y1.size() / channels;
      const VectorX<Scalar> a = y1;
      const VectorX<Scalar> b = y2;
      detail::RowMajorMap<Scalar> am(a.data(), channels, pixels);
      detail::RowMajorMap<Scalar> bm(b.data(), channels, pixels);
      const MatrixX<Scalar> w = spec.bilinear_weights.template cast<Scalar>();
      return (am.array() * (w * bm).array()).sum() / Scalar(pixels);
    }
  }
  return Scalar(0);
}

/// Accumulates upstream * dh/dy1 into g1, upstream * dh/dy2 into g2 and, for
/// the bilinear critic, upstream * dh/dW into gw (when non-null).
template <typename Scalar>
void critic_backward(const CriticSpec& spec, const Eigen::Ref<const VectorX<Scalar>>& y1,
                     const Eigen::Ref<const VectorX<Scalar>>& y2, int channels, Scalar upstream,
                     Eigen::Ref<VectorX<Scalar>> g1, Eigen::Ref<VectorX<Scalar>> g2, MatrixX<Scalar>* gw) {
  switch (spec.kind) {
    case CriticKind::mse: {
      const Scalar scale = spec.reduction == Reduction::mean ? Scalar(2) / Scalar(y1.size()) : Scalar(2);
      g1.noalias() -= (upstream * scale) * (y1 - y2);
      g2.noalias() += (upstream * scale) * (y1 - y2);
      return;
    }
    case CriticKind::cosine: {
      const Scalar n1 = y1.norm();
      const Scalar n2 = y2.norm();
      const Scalar d1 = n1 + Scalar(kCosineEpsilon);
      const Scalar d2 = n2 + Scalar(kCosineEpsilon);
      const Scalar dot = y1.dot(y2);
      g1.noalias() += upstream / (d1 * d2) * y2;
      g2.noalias() += upstream / (d1 * d2) * y1;
      if (n1 > Scalar(0)) g1.noalias() -= upstream * dot / (d1 * d1 * d2 * n1) * y1;
      if (n2 > Scalar(0)) g2.noalias() -= upstream * dot / (d1 * d2 * d2 * n2) * y2;
      return;
    }
    case CriticKind::bilinear: {
      const Eigen::Index pixels = y1.size() / channels;
      using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      Eigen::Map<const RowMajor> a(y1.data(), channels, pixels);
      Eigen::Map<const RowMajor> b(y2.data(), channels, pixels);
      Eigen::Map<RowMajor> ga(g1.data(), channels, pixels);
      Eigen::Map<RowMajor> gb(g2.data(), channels, pixels);
      const MatrixX<Scalar> w = spec.bilinear_weights.template cast<Scalar>();
      const Scalar s = upstream / Scalar(pixels);
      ga.noalias() += s * (w * b);
      gb.noalias() += s * (w.transpose() * a);
      if (gw) gw->noalias() += s * (a * b.transpose());
      return;
    }
  }
}

/// S[i][j] = h(z_i, z_j) / tau for every ordered pair.
template <typename Scalar>
MatrixX<Scalar> similarity_matrix(const LatentBatch<Scalar>& batch, const CriticSpec& spec, double tau) {
  batch.validate();
  spec.validate(batch.channels);
  const Eigen::Index n = batch.z.rows();
  MatrixX<Scalar> s(n, n);
  const bool symmetric = spec.kind != CriticKind::bilinear;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = symmetric ? i : 0; j < n; ++j) {
      s(i, j) = critic_eval<Scalar>(spec, batch.z.row(i).transpose(), batch.z.row(j).transpose(), batch.channels) /
                Scalar(tau);
      if (symmetric) s(j, i) = s(i, j);
    }
  }
  return s;
}

/// True when j belongs to the same tuple as i (including i itself).
inline bool same_tuple(Eigen::Index i, Eigen::Index j, int tuples) { return (i % tuples) == (j % tuples); }

/// Loss from a precomputed similarity matrix; optionally dL/dS.
template <typename Scalar>
Scalar infonce_from_similarity(const MatrixX<Scalar>& s, int modalities, int tuples, MatrixX<Scalar>* grad = nullptr) {
  if (tuples < 2) throw LossError("InfoNCE needs at least two tuples (N >= 2)");
  const Eigen::Index mn = Eigen::Index(modalities) * tuples;
  if (s.rows() != mn || s.cols() != mn) throw LossError("similarity matrix must be MN x MN");
  if (!s.allFinite()) throw LossError("similarity matrix contains non-finite entries");
  if (grad) grad->setZero(mn, mn);
  Scalar total(0);
  VectorX<Scalar> weights(mn);
  for (Eigen::Index i = 0; i < mn; ++i) {
    Scalar neg_max = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < mn; ++j) {
      if (!same_tuple(i, j, tuples)) neg_max = std::max(neg_max, s(i, j));
    }
    for (int m = 1; m < modalities; ++m) {
      const Eigen::Index p = (i + Eigen::Index(m) * tuples) % mn;
      const Scalar shift = std::max(neg_max, s(i, p));
      Scalar denom = std::exp(s(i, p) - shift);
      for (Eigen::Index j = 0; j < mn; ++j) {
        if (!same_tuple(i, j, tuples)) denom += std::exp(s(i, j) - shift);
      }
      total += -s(i, p) + shift + std::log(denom);
      if (grad) {
        weights.setZero();
        for (Eigen::Index j = 0; j < mn; ++j) {
          if (!same_tuple(i, j, tuples)) weights(j) = std::exp(s(i, j) - shift) / denom;
        }
        weights(p) = std::exp(s(i, p) - shift) / denom - Scalar(1);
        grad->row(i) += weights.transpose();
      }
    }
  }
  const Scalar norm = Scalar(mn) * Scalar(modalities - 1);
  if (grad) *grad /= norm;
  return total / norm;
}

template <typename Scalar>
struct LossGradient {
  Scalar loss{0};
  MatrixX<Scalar> dz;        // same shape as the latent batch
  MatrixX<Scalar> dweights;  // bilinear critic only
};

template <typename Scalar>
Scalar infonce_loss(const LatentBatch<Scalar>& batch, const CriticSpec& spec, double tau) {
  return infonce_from_similarity<Scalar>(similarity_matrix(batch, spec, tau), batch.modalities, batch.tuples);
}

/// Loss together with its gradient with respect to every latent.
template <typename Scalar>
LossGradient<Scalar> infonce_loss_with_gradient(const LatentBatch<Scalar>& batch, const CriticSpec& spec, double tau) {
  const MatrixX<Scalar> s = similarity_matrix(batch, spec, tau);
  MatrixX<Scalar> ds;
  LossGradient<Scalar> out;
  out.loss = infonce_from_similarity<Scalar>(s, batch.modalities, batch.tuples, &ds);
  out.dz = MatrixX<Scalar>::Zero(batch.z.rows(), batch.z.cols());
  if (spec.kind == CriticKind::bilinear) {
    out.dweights = MatrixX<Scalar>::Zero(spec.bilinear_weights.rows(), spec.bilinear_weights.cols());
  }
  VectorX<Scalar> gi(batch.z.cols());
  VectorX<Scalar> gj(batch.z.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      const Scalar g = ds(i, j);
      if (g == Scalar(0)) continue;
      gi.setZero();
      gj.setZero();
      critic_backward<Scalar>(spec, batch.z.row(i).transpose(), batch.z.row(j).transpose(), batch.channels,
                              g / Scalar(tau), gi, gj,
                              spec.kind == CriticKind::bilinear ? &out.dweights : nullptr);
      out.dz.row(i) += gi.transpose();
      out.dz.row(j) += gj.transpose();
    }
  }
  return out;
}

/// Stabilised latent: the model sees the input turned by g and its output is
/// turned back by g^-1, so an equivariant model yields model(x) for every g.
template <typename Model>
Image equivariant_latent(Model&& model, const Image& x, C4Element g) {
  if (!x.is_square()) {
    throw ImageError("C4 routing needs a square input, got " + std::to_string(x.height()) + "x" +
                     std::to_string(x.width()));
  }
  if (g.is_identity()) return model(x);
  return rotate_c4(model(rotate_c4(x, g)), g.inverse());
}

/// Source of group elements, one per (modality, tuple) latent.
using C4Draw = std::function<C4Element()>;

/// Group elements for a whole batch, modality-major. The trivial group always
/// yields the identity; C4 draws uniformly through `draw`.
std::vector<C4Element> draw_group_elements(Group group, int modalities, int tuples, const C4Draw& draw);

/// Uniform C4 sampler bound to a seeded engine.
template <typename Engine>
C4Draw uniform_c4(Engine& engine) {
  return [&engine] { return C4Element(int(engine() % 4u)); };
}

}  // namespace comir
