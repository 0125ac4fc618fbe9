#pragma once

#include "comir/data.hpp"
#include "comir/image.hpp"
#include "comir/loss.hpp"
#include "comir/nn.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense U-Net hyperparameters. Defaults follow the published architecture;
/// `desk()` is a much smaller network that trains on one CPU core in minutes.
struct EncoderConfig {
  int in_channels = 1;
  int out_channels = 1;
  int first_conv_filters = 32;
  int levels = 4;        // dense blocks on each side of the bottleneck
  int block_depth = 6;   // layers per down/up dense block
  int growth_rate = 12;
  int bottleneck_layers = 4;
  double compression = 0.75;
  double dropout = 0.2;
  std::string pooling = "max";
  std::string upsampling = "bilinear";

  static EncoderConfig desk(int in_channels = 1, int out_channels = 1);

  void validate() const;
  /// Spatial dims must be a multiple of this for an unpadded forward pass.
  int granularity() const { return 1 << levels; }
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }

  /// Batched pass; spatial dims must be multiples of granularity().
  nn::Tensor forward(const nn::Tensor& x, bool train, nn::Rng& drop_rng);
  /// Back-propagates dL/doutput of the last training forward; accumulates parameter gradients.
  nn::Tensor backward(const nn::Tensor& dy);

  /// Deterministic evaluation-mode inference on one image of any size >= 1 px;
  /// reflect-pads to the pooling granularity and crops back.
  Image infer(const Image& x);

  std::vector<nn::Param*> parameters();
  std::vector<nn::Buffer> buffers();
  void zero_grad();
  std::size_t parameter_count();
  /// FNV-1a over all parameter and buffer bytes in declaration order.
  std::uint64_t parameter_hash();
  /// Human-readable layer list, e.g. "down0: dense(16 -> 32, depth 2, growth 8)".
  std::vector<std::string> layer_list() const;

 private:
  EncoderConfig cfg_;
  nn::Conv2d first_;
  std::vector<nn::DenseBlock> down_;
  std::vector<nn::TransitionDown> trans_down_;
  nn::DenseBlock bottleneck_;
  std::vector<nn::TransitionUp> trans_up_;
  std::vector<nn::DenseBlock> up_;
  nn::Conv2d last_;
  std::vector<int> skip_channels_;
};

Encoder build_encoder(const EncoderConfig& cfg, std::uint64_t seed);

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 1e-2;
  double weight_decay = 1e-5;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int batch_size = 32;
  int steps_per_epoch = 32;
  int epochs = 23;
  int patch_size = 128;
  double temperature = 0.5;
  double gradient_norm_clip = 1.0;
  double activation_decay_l1 = 1e-4;
  double activation_decay_l2 = 1e-4;
  CriticKind critic = CriticKind::mse;
  Group group = Group::c4;
  std::uint64_t seed = 1;

  void validate() const;
  long long total_steps() const { return (long long)epochs * steps_per_epoch; }
};

/// Adam (L2-coupled weight decay) or SGD with momentum and weight decay.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
  void step(const std::vector<nn::Param*>& params);

 private:
  TrainConfig cfg_;
  std::vector<nn::Matrix> first_;
  std::vector<nn::Matrix> second_;
  long long t_ = 0;
};

struct StepRecord {
  long long step = 0;
  double loss = 0.0;            // objective including activation decay
  double grad_norm = 0.0;       // global norm before clipping
  double clipped_norm = 0.0;    // global norm actually applied
};

/// Trained per-modality encoders together with everything needed to reuse them.
struct ComirModel {
  std::vector<std::string> modalities;
  std::vector<EncoderConfig> encoder_configs;
  std::vector<Encoder> encoders;
  TrainConfig train;
  Eigen::MatrixXd bilinear_weights;  // bilinear critic only
  std::vector<StepRecord> history;

  int modality_index(const std::string& name) const;
};

using StepCallback = std::function<void(const StepRecord&)>;

/// Builds one encoder per modality and runs epochs * steps_per_epoch steps.
ComirModel train(const std::vector<MultimodalSample>& samples, const std::vector<std::string>& modalities,
                 const std::vector<EncoderConfig>& encoder_cfgs, const TrainConfig& train_cfg,
                 const AugmentationConfig& aug_cfg, const StepCallback& on_step = {});

/// Loss of one batch: every patch is routed through equivariant_latent with
/// its own group draw (modality-major), then InfoNCE over the stacked latents.
/// The training loop computes the same quantity on batched tensors.
double training_loss(const std::vector<std::function<Image(const Image&)>>& models,
                     const std::vector<PatchTuple>& batch, const CriticSpec& spec, const LossConfig& cfg,
                     const C4Draw& draw);

/// Full-image representation of `img` through the encoder of `modality`.
Image infer_comir(ComirModel& model, const std::string& modality, const Image& img);

/// 8-bit rendering 255 * sigmoid(v / T), rounded half to even.
Image visualize_logistic(const Image& rep, double temperature = 0.5);

/// Joint 8-bit rendering of a representation pair: both are scaled by the
/// larger of their 1st percentiles and the smaller of their 99th percentiles.
std::pair<Image, Image> visualize_joint_percentile(const Image& a, const Image& b);

/// Stacks images (same shape) into a batched tensor and back.
nn::Tensor to_tensor(const std::vector<Image>& images);
std::vector<Image> to_images(const nn::Tensor& t);

}  // namespace comir
