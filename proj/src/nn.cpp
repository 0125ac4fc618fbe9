#include "comir/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace comir::nn {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, float bound, Rng& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

void im2col(const float* image, Eigen::Index channel_stride, int channels, int height, int width, int kernel,
            Matrix& cols) {
  const int r = kernel / 2;
  const Eigen::Index hw = Eigen::Index(height) * width;
  cols.resize(Eigen::Index(channels) * kernel * kernel, hw);
  for (int c = 0; c < channels; ++c) {
    const float* src = image + c * channel_stride;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        float* dst = cols.row((Eigen::Index(c) * kernel + ky) * kernel + kx).data();
        const int dy = ky - r;
        const int dx = kx - r;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(width, width - dx);
        for (int y = 0; y < height; ++y) {
          float* out = dst + Eigen::Index(y) * width;
          const int sy = y + dy;
          if (sy < 0 || sy >= height) {
            std::fill(out, out + width, 0.0f);
            continue;
          }
          std::fill(out, out + x0, 0.0f);
          std::copy(src + Eigen::Index(sy) * width + x0 + dx, src + Eigen::Index(sy) * width + x1 + dx, out + x0);
          std::fill(out + x1, out + width, 0.0f);
        }
      }
    }
  }
}

void gather_taps(const Matrix& z, int channels, int height, int width, int kernel, float* out,
                 Eigen::Index channel_stride) {
  const int r = kernel / 2;
  for (int c = 0; c < channels; ++c) {
    float* dst = out + c * channel_stride;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const float* src = z.row((Eigen::Index(c) * kernel + ky) * kernel + kx).data();
        const int dy = ky - r;
        const int dx = kx - r;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(width, width - dx);
        for (int y = 0; y < height; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= height) continue;
          const float* __restrict in = src + Eigen::Index(sy) * width + dx;
          float* __restrict o = dst + Eigen::Index(y) * width;
          for (int x = x0; x < x1; ++x) o[x] += in[x];
        }
      }
    }
  }
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (!(a.shape == b.shape)) throw std::invalid_argument("concat: tensor shapes differ");
  Tensor out(a.channels() + b.channels(), a.shape);
  out.data.topRows(a.channels()) = a.data;
  out.data.bottomRows(b.channels()) = b.data;
  return out;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, const std::string& name, Rng& rng)
    : in_(in_channels), out_(out_channels), k_(kernel) {
  const int fan_in = in_channels * kernel * kernel;
  // Kaiming-uniform with a = sqrt(5), the common framework default.
  const float bound = 1.0f / std::sqrt(float(fan_in));
  weight_ = {name + ".weight", uniform(out_channels, fan_in, bound, rng), {}};
  bias_ = {name + ".bias", uniform(out_channels, 1, bound, rng), {}};
  weight_.zero_grad();
  bias_.zero_grad();
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.channels() != in_) {
    throw std::invalid_argument("conv expects " + std::to_string(in_) + " channels, got " +
                                std::to_string(x.channels()));
  }
  Tensor y(out_, x.shape);
  const Eigen::Index hw = x.shape.pixels();
  if (k_ == 1) {
    y.data.noalias() = weight_.value * x.data;
  } else {
    // Taps first, shifts second: z[(o, t)] = W_t x, then y[o](p) = sum_t z[(o, t)](p + d_t).
    const int kk = k_ * k_;
    Matrix taps(Eigen::Index(out_) * kk, in_);
    for (int o = 0; o < out_; ++o) {
      for (int i = 0; i < in_; ++i) {
        for (int t = 0; t < kk; ++t) taps(o * kk + t, i) = weight_.value(o, i * kk + t);
      }
    }
    Matrix z;
    for (int b = 0; b < x.shape.batch; ++b) {
      z.noalias() = taps * x.data.middleCols(b * hw, hw);
      gather_taps(z, out_, x.shape.height, x.shape.width, k_, y.data.data() + b * hw, y.data.cols());
    }
  }
  y.data.colwise() += Eigen::Map<const Vector>(bias_.value.data(), out_);
  if (train) input_ = x;
  return y;
}

// The input gradient is the correlation of dy with the spatially flipped,
// channel-transposed kernel, so it reuses im2col on the (usually thin) dy
// instead of scattering a wide column matrix back. The weight gradient
// follows from the same columns: dW[o, (i, ky, kx)] = sum_q im2col(dy)[(o,
// k-1-ky, k-1-kx), q] * x[i, q].
Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = input_;
  Tensor dx(in_, x.shape);
  bias_.grad += dy.data.rowwise().sum();
  const Eigen::Index hw = x.shape.pixels();
  if (k_ == 1) {
    weight_.grad.noalias() += dy.data * x.data.transpose();
    dx.data.noalias() = weight_.value.transpose() * dy.data;
  } else {
    const int kk = k_ * k_;
    // flipped(i, (o, t)) = W(o, (i, kk-1-t)), with t = ky * k + kx.
    Matrix flipped(in_, Eigen::Index(out_) * kk);
    for (int o = 0; o < out_; ++o) {
      for (int i = 0; i < in_; ++i) {
        for (int t = 0; t < kk; ++t) flipped(i, o * kk + t) = weight_.value(o, i * kk + (kk - 1 - t));
      }
    }
    Matrix cols;
    Matrix grad(Eigen::Index(out_) * kk, in_);
    grad.setZero();
    for (int b = 0; b < x.shape.batch; ++b) {
      im2col(dy.data.data() + b * hw, dy.data.cols(), out_, x.shape.height, x.shape.width, k_, cols);
      dx.data.middleCols(b * hw, hw).noalias() = flipped * cols;
      grad.noalias() += cols * x.data.middleCols(b * hw, hw).transpose();
    }
    for (int o = 0; o < out_; ++o) {
      for (int i = 0; i < in_; ++i) {
        for (int t = 0; t < kk; ++t) weight_.grad(o, i * kk + (kk - 1 - t)) += grad(o * kk + t, i);
      }
    }
  }
  input_ = Tensor();
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, const std::string& name) : name_(name) {
  gamma_ = {name + ".weight", Matrix::Ones(channels, 1), {}};
  beta_ = {name + ".bias", Matrix::Zero(channels, 1), {}};
  gamma_.zero_grad();
  beta_.zero_grad();
  running_mean_ = Matrix::Zero(channels, 1);
  running_var_ = Matrix::Ones(channels, 1);
}

void BatchNorm2d::collect_buffers(std::vector<Buffer>& out) {
  out.push_back({name_ + ".running_mean", &running_mean_});
  out.push_back({name_ + ".running_var", &running_var_});
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  const Eigen::Index c = x.channels();
  const Eigen::Index n = x.data.cols();
  Vector mean(c);
  Vector inv_std(c);
  if (train) {
    if (n < 2) throw std::invalid_argument("batch normalisation needs more than one value per channel");
    mean = x.data.rowwise().mean();
    for (Eigen::Index i = 0; i < c; ++i) {
      const double var = double((x.data.row(i).array() - mean(i)).square().sum()) / double(n);
      inv_std(i) = float(1.0 / std::sqrt(var + kEpsilon));
      running_mean_(i, 0) = (1 - kMomentum) * running_mean_(i, 0) + kMomentum * mean(i);
      running_var_(i, 0) = (1 - kMomentum) * running_var_(i, 0) + kMomentum * float(var * n / (n - 1));
    }
  } else {
    for (Eigen::Index i = 0; i < c; ++i) {
      mean(i) = running_mean_(i, 0);
      inv_std(i) = 1.0f / std::sqrt(running_var_(i, 0) + kEpsilon);
    }
  }
  Tensor y(Matrix(c, n), x.shape);
  for (Eigen::Index i = 0; i < c; ++i) {
    y.data.row(i) = (x.data.row(i).array() - mean(i)) * inv_std(i);
  }
  if (train) {
    xhat_ = y.data;
    inv_std_ = inv_std;
  }
  for (Eigen::Index i = 0; i < c; ++i) {
    y.data.row(i) = y.data.row(i).array() * gamma_.value(i, 0) + beta_.value(i, 0);
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const Eigen::Index c = dy.channels();
  const float n = float(dy.data.cols());
  Tensor dx(Matrix(c, dy.data.cols()), dy.shape);
  for (Eigen::Index i = 0; i < c; ++i) {
    const auto g = dy.data.row(i).array();
    const auto xh = xhat_.row(i).array();
    const float sum_g = g.sum();
    const float sum_gx = (g * xh).sum();
    gamma_.grad(i, 0) += sum_gx;
    beta_.grad(i, 0) += sum_g;
    const float k = gamma_.value(i, 0) * inv_std_(i) / n;
    dx.data.row(i) = k * (n * g - sum_g - xh * sum_gx);
  }
  xhat_ = Matrix();
  return dx;
}

// ----------------------------------------------------------- ReluDropout

Tensor ReluDropout::forward(Tensor x, bool train, double drop_rate, Rng& rng, bool relu) {
  const bool drop = train && drop_rate > 0.0;
  if (relu) x.data = x.data.cwiseMax(0.0f);
  if (drop) {
    const float gain = float(1.0 / (1.0 - drop_rate));
    const std::uint64_t cut = std::uint64_t(drop_rate * 4294967296.0);
    scale_.resize(x.data.rows(), x.data.cols());
    float* s = scale_.data();
    const Eigen::Index total = scale_.size();
    Eigen::Index i = 0;
    while (i < total) {
      // Two 32-bit uniforms per engine call.
      const std::uint64_t bits = rng();
      s[i++] = (bits & 0xffffffffu) < cut ? 0.0f : gain;
      if (i < total) s[i++] = (bits >> 32) < cut ? 0.0f : gain;
    }
    x.data.array() *= scale_.array();
    if (relu) scale_ = (x.data.array() > 0.0f).select(scale_, 0.0f);
  } else if (train) {
    if (relu) {
      scale_ = (x.data.array() > 0.0f).cast<float>();
    } else {
      scale_.resize(0, 0);
    }
  }
  return x;
}

Tensor ReluDropout::backward(Tensor dy) const {
  if (scale_.size() != 0) dy.data.array() *= scale_.array();
  return dy;
}

// -------------------------------------------------------------- MaxPool2

Tensor MaxPool2::forward(const Tensor& x, bool train) {
  if (x.shape.height % 2 || x.shape.width % 2) throw std::invalid_argument("max pooling needs even spatial dims");
  const Shape out_shape{x.shape.batch, x.shape.height / 2, x.shape.width / 2};
  Tensor y(x.channels(), out_shape);
  if (train) {
    in_shape_ = x.shape;
    argmax_.resize(std::size_t(y.data.size()));
  }
  const int w = x.shape.width;
  const Eigen::Index hw_in = x.shape.pixels();
  const Eigen::Index hw_out = out_shape.pixels();
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    const float* src = x.data.row(c).data();
    float* dst = y.data.row(c).data();
    for (int b = 0; b < x.shape.batch; ++b) {
      for (int oy = 0; oy < out_shape.height; ++oy) {
        for (int ox = 0; ox < out_shape.width; ++ox) {
          const Eigen::Index base = b * hw_in + Eigen::Index(2 * oy) * w + 2 * ox;
          Eigen::Index best = base;
          for (const Eigen::Index cand : {base + 1, base + w, base + w + 1}) {
            if (src[cand] > src[best]) best = cand;
          }
          const Eigen::Index o = b * hw_out + Eigen::Index(oy) * out_shape.width + ox;
          dst[o] = src[best];
          if (train) argmax_[std::size_t(c * y.data.cols() + o)] = std::int32_t(best);
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& dy) const {
  Tensor dx(dy.channels(), in_shape_);
  for (Eigen::Index c = 0; c < dy.channels(); ++c) {
    const float* g = dy.data.row(c).data();
    float* out = dx.data.row(c).data();
    const std::int32_t* idx = argmax_.data() + c * dy.data.cols();
    for (Eigen::Index o = 0; o < dy.data.cols(); ++o) out[idx[o]] += g[o];
  }
  return dx;
}

// ------------------------------------------------------------- Upsample2

namespace {

// Source taps for output index o of a x2 bilinear upsampling of length n.
struct Tap {
  int i0, i1;
  float w0, w1;
};

std::vector<Tap> upsample_taps(int n) {
  std::vector<Tap> taps(std::size_t(2 * n));
  for (int o = 0; o < 2 * n; ++o) {
    const float src = std::max(0.0f, (o + 0.5f) / 2.0f - 0.5f);
    const int i0 = std::min(int(src), n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    const float f = src - float(i0);
    taps[std::size_t(o)] = {i0, i1, 1.0f - f, f};
  }
  return taps;
}

}  // namespace

Tensor Upsample2::forward(const Tensor& x) {
  in_shape_ = x.shape;
  const Shape out_shape{x.shape.batch, 2 * x.shape.height, 2 * x.shape.width};
  Tensor y(x.channels(), out_shape);
  const auto ty = upsample_taps(x.shape.height);
  const auto tx = upsample_taps(x.shape.width);
  const int w = x.shape.width;
  const int ow = out_shape.width;
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    for (int b = 0; b < x.shape.batch; ++b) {
      const float* src = x.data.row(c).data() + b * x.shape.pixels();
      float* dst = y.data.row(c).data() + b * out_shape.pixels();
      for (int oy = 0; oy < out_shape.height; ++oy) {
        const Tap& a = ty[std::size_t(oy)];
        const float* r0 = src + Eigen::Index(a.i0) * w;
        const float* r1 = src + Eigen::Index(a.i1) * w;
        float* out = dst + Eigen::Index(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          const Tap& t = tx[std::size_t(ox)];
          out[ox] = a.w0 * (t.w0 * r0[t.i0] + t.w1 * r0[t.i1]) + a.w1 * (t.w0 * r1[t.i0] + t.w1 * r1[t.i1]);
        }
      }
    }
  }
  return y;
}

Tensor Upsample2::backward(const Tensor& dy) const {
  Tensor dx(dy.channels(), in_shape_);
  const auto ty = upsample_taps(in_shape_.height);
  const auto tx = upsample_taps(in_shape_.width);
  const int w = in_shape_.width;
  const int ow = dy.shape.width;
  for (Eigen::Index c = 0; c < dy.channels(); ++c) {
    for (int b = 0; b < dy.shape.batch; ++b) {
      const float* g = dy.data.row(c).data() + b * dy.shape.pixels();
      float* dst = dx.data.row(c).data() + b * in_shape_.pixels();
      for (int oy = 0; oy < dy.shape.height; ++oy) {
        const Tap& a = ty[std::size_t(oy)];
        float* r0 = dst + Eigen::Index(a.i0) * w;
        float* r1 = dst + Eigen::Index(a.i1) * w;
        const float* in = g + Eigen::Index(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          const Tap& t = tx[std::size_t(ox)];
          const float v = in[ox];
          r0[t.i0] += a.w0 * t.w0 * v;
          r0[t.i1] += a.w0 * t.w1 * v;
          r1[t.i0] += a.w1 * t.w0 * v;
          r1[t.i1] += a.w1 * t.w1 * v;
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ DenseLayer

DenseLayer::DenseLayer(int in_channels, int growth, double dropout, const std::string& name, Rng& rng)
    : bn_(in_channels, name + ".norm"), conv_(in_channels, growth, 3, name + ".conv", rng), dropout_(dropout) {}

Tensor DenseLayer::forward(const Tensor& x, bool train, Rng& drop_rng) {
  Tensor h = act_.forward(bn_.forward(x, train), train, 0.0, drop_rng);
  return drop_.forward(conv_.forward(h, train), train, dropout_, drop_rng, false);
}

Tensor DenseLayer::backward(const Tensor& dy) {
  return bn_.backward(act_.backward(conv_.backward(drop_.backward(dy))));
}

void DenseLayer::collect(std::vector<Param*>& out) {
  bn_.collect(out);
  conv_.collect(out);
}

// ------------------------------------------------------------ DenseBlock

DenseBlock::DenseBlock(int in_channels, int depth, int growth, double dropout, bool keep_input,
                       const std::string& name, Rng& rng)
    : in_(in_channels), growth_(growth), keep_input_(keep_input) {
  for (int i = 0; i < depth; ++i) {
    layers_.emplace_back(in_channels + i * growth, growth, dropout, name + ".layer" + std::to_string(i), rng);
  }
}

Tensor DenseBlock::forward(const Tensor& x, bool train, Rng& drop_rng) {
  Tensor feats(in_ + depth() * growth_, x.shape);
  feats.data.topRows(in_) = x.data;
  Tensor view;
  for (int i = 0; i < depth(); ++i) {
    const int rows = in_ + i * growth_;
    view = Tensor(feats.data.topRows(rows), x.shape);
    feats.data.middleRows(rows, growth_) = layers_[std::size_t(i)].forward(view, train, drop_rng).data;
  }
  if (keep_input_) return feats;
  return Tensor(feats.data.bottomRows(depth() * growth_), x.shape);
}

Tensor DenseBlock::backward(const Tensor& dy) {
  Matrix dfeats(in_ + depth() * growth_, dy.data.cols());
  if (keep_input_) {
    dfeats = dy.data;
  } else {
    dfeats.topRows(in_).setZero();
    dfeats.bottomRows(depth() * growth_) = dy.data;
  }
  for (int i = depth() - 1; i >= 0; --i) {
    const int rows = in_ + i * growth_;
    const Tensor dnew(dfeats.middleRows(rows, growth_), dy.shape);
    dfeats.topRows(rows) += layers_[std::size_t(i)].backward(dnew).data;
  }
  return Tensor(dfeats.topRows(in_), dy.shape);
}

void DenseBlock::collect(std::vector<Param*>& out) {
  for (auto& l : layers_) l.collect(out);
}

void DenseBlock::collect_buffers(std::vector<Buffer>& out) {
  for (auto& l : layers_) l.collect_buffers(out);
}

// -------------------------------------------------------- TransitionDown

TransitionDown::TransitionDown(int in_channels, int out_channels, double dropout, const std::string& name, Rng& rng)
    : bn_(in_channels, name + ".norm"), conv_(in_channels, out_channels, 1, name + ".conv", rng), dropout_(dropout) {}

Tensor TransitionDown::forward(const Tensor& x, bool train, Rng& drop_rng) {
  Tensor h = act_.forward(bn_.forward(x, train), train, 0.0, drop_rng);
  h = drop_.forward(conv_.forward(h, train), train, dropout_, drop_rng, false);
  return pool_.forward(h, train);
}

Tensor TransitionDown::backward(const Tensor& dy) {
  return bn_.backward(act_.backward(conv_.backward(drop_.backward(pool_.backward(dy)))));
}

void TransitionDown::collect(std::vector<Param*>& out) {
  bn_.collect(out);
  conv_.collect(out);
}

// ---------------------------------------------------------- TransitionUp

TransitionUp::TransitionUp(int in_channels, int out_channels, const std::string& name, Rng& rng)
    : conv_(in_channels, out_channels, 3, name + ".conv", rng) {}

Tensor TransitionUp::forward(const Tensor& x, bool train) { return conv_.forward(up_.forward(x), train); }

Tensor TransitionUp::backward(const Tensor& dy) { return up_.backward(conv_.backward(dy)); }

}  // namespace comir::nn
