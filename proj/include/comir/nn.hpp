#pragma once

// Minimal layer library for fully convolutional image-to-image networks.
//
// A tensor stores a batch of equally sized feature maps as a row-major
// (channels x batch*height*width) matrix; image b occupies the column range
// [b*h*w, (b+1)*h*w). Channel concatenation is therefore plain row stacking.
// Every layer caches what its backward pass needs during a training forward.

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace comir::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXf;

struct Shape {
  int batch = 0;
  int height = 0;
  int width = 0;

  Eigen::Index pixels() const { return Eigen::Index(height) * width; }
  Eigen::Index columns() const { return pixels() * batch; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Tensor {
  Matrix data;
  Shape shape;

  Tensor() = default;
  Tensor(int channels, Shape s) : data(Matrix::Zero(channels, s.columns())), shape(s) {}
  Tensor(Matrix m, Shape s) : data(std::move(m)), shape(s) {}

  int channels() const { return int(data.rows()); }
};

/// Trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Non-trainable state that still belongs to a checkpoint (running statistics).
struct Buffer {
  std::string name;
  Matrix* value = nullptr;
};

using Rng = std::mt19937_64;

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, const std::string& name, Rng& rng);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Param*>& out) { out.push_back(&weight_); out.push_back(&bias_); }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }

 private:
  int in_ = 0, out_ = 0, k_ = 1;
  Param weight_;  // out x (in * k * k)
  Param bias_;    // out x 1
  Tensor input_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(int channels, const std::string& name);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Param*>& out) { out.push_back(&gamma_); out.push_back(&beta_); }
  void collect_buffers(std::vector<Buffer>& out);

  static constexpr float kEpsilon = 1e-5f;
  static constexpr float kMomentum = 0.1f;

 private:
  Param gamma_;  // c x 1
  Param beta_;   // c x 1
  Matrix running_mean_;
  Matrix running_var_;
  std::string name_;
  Matrix xhat_;
  Vector inv_std_;
};

/// ReLU followed by inverted dropout; rate 0 disables the dropout half.
class ReluDropout {
 public:
  Tensor forward(Tensor x, bool train, double drop_rate, Rng& rng, bool relu = true);
  Tensor backward(Tensor dy) const;

 private:
  Matrix scale_;  // 0 where the unit was cut (ReLU or dropout), else the dropout gain
};

class MaxPool2 {
 public:
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy) const;

 private:
  Shape in_shape_;
  std::vector<std::int32_t> argmax_;
};

/// Bilinear x2 upsampling with half-pixel centres and edge clamping.
class Upsample2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  Shape in_shape_;
};

/// BN -> ReLU -> 3x3 conv -> dropout, producing `growth` new feature maps.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(int in_channels, int growth, double dropout, const std::string& name, Rng& rng);

  Tensor forward(const Tensor& x, bool train, Rng& drop_rng);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Param*>& out);
  void collect_buffers(std::vector<Buffer>& out) { bn_.collect_buffers(out); }

 private:
  BatchNorm2d bn_;
  ReluDropout act_;
  Conv2d conv_;
  ReluDropout drop_;
  double dropout_ = 0.0;
};

/// Layers see the concatenation of the block input and all previous outputs.
class DenseBlock {
 public:
  DenseBlock() = default;
  DenseBlock(int in_channels, int depth, int growth, double dropout, bool keep_input, const std::string& name,
             Rng& rng);

  Tensor forward(const Tensor& x, bool train, Rng& drop_rng);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Param*>& out);
  void collect_buffers(std::vector<Buffer>& out);

  int in_channels() const { return in_; }
  int out_channels() const { return keep_input_ ? in_ + depth() * growth_ : depth() * growth_; }
  int depth() const { return int(layers_.size()); }

 private:
  std::vector<DenseLayer> layers_;
  int in_ = 0;
  int growth_ = 0;
  bool keep_input_ = true;
};

/// BN -> ReLU -> 1x1 conv (compression) -> dropout -> 2x2 max pooling.
class TransitionDown {
 public:
  TransitionDown() = default;
  TransitionDown(int in_channels, int out_channels, double dropout, const std::string& name, Rng& rng);

  Tensor forward(const Tensor& x, bool train, Rng& drop_rng);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Param*>& out);
  void collect_buffers(std::vector<Buffer>& out) { bn_.collect_buffers(out); }
  int out_channels() const { return conv_.out_channels(); }

 private:
  BatchNorm2d bn_;
  ReluDropout act_;
  Conv2d conv_;
  ReluDropout drop_;
  MaxPool2 pool_;
  double dropout_ = 0.0;
};

/// Bilinear x2 upsampling followed by a 3x3 convolution (no transposed convolution).
class TransitionUp {
 public:
  TransitionUp() = default;
  TransitionUp(int in_channels, int out_channels, const std::string& name, Rng& rng);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Param*>& out) { conv_.collect(out); }
  int out_channels() const { return conv_.out_channels(); }

 private:
  Upsample2 up_;
  Conv2d conv_;
};

/// Row-stacks two tensors of equal shape.
Tensor concat(const Tensor& a, const Tensor& b);

/// Zero-padded k x k patches of one image whose channel planes start
/// `channel_stride` floats apart: (c*k*k) x (h*w), rows ordered (c, ky, kx).
void im2col(const float* image, Eigen::Index channel_stride, int channels, int height, int width, int kernel,
            Matrix& cols);
/// Adds the shifted tap planes of `z` (rows ordered (c, ky, kx)) into an
/// image: out[c](p) += sum over taps of z[(c, ky, kx)](p + (ky - k/2, kx - k/2)).
void gather_taps(const Matrix& z, int channels, int height, int width, int kernel, float* out,
                 Eigen::Index channel_stride);

}  // namespace comir::nn
