#include "comir/encoder.hpp"

#include "comir/filters.hpp"
#include "comir/seed.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace comir {

// --------------------------------------------------------------- configs

EncoderConfig EncoderConfig::desk(int in_channels, int out_channels) {
  EncoderConfig cfg;
  cfg.in_channels = in_channels;
  cfg.out_channels = out_channels;
  cfg.first_conv_filters = 8;
  cfg.levels = 2;
  cfg.block_depth = 2;
  cfg.growth_rate = 6;
  cfg.bottleneck_layers = 2;
  cfg.dropout = 0.0;
  return cfg;
}

void EncoderConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("encoder: " + what); };
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (out_channels < 1) fail("out_channels must be >= 1");
  if (first_conv_filters < 1) fail("first_conv_filters must be >= 1");
  if (levels < 0 || levels > 8) fail("levels must be in [0, 8]");
  if (block_depth < 1) fail("block_depth must be >= 1");
  if (growth_rate < 1) fail("growth_rate must be >= 1");
  if (bottleneck_layers < 1) fail("bottleneck_layers must be >= 1");
  if (!(compression > 0.0 && compression <= 1.0)) fail("compression must be in (0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (pooling != "max") fail("only max pooling is supported, got '" + pooling + "'");
  if (upsampling != "bilinear") fail("only bilinear upsampling is supported, got '" + upsampling + "'");
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train: " + what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (steps_per_epoch < 1) fail("steps_per_epoch must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (patch_size < 1) fail("patch_size must be >= 1");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (!(gradient_norm_clip > 0.0)) fail("gradient_norm_clip must be positive");
  if (activation_decay_l1 < 0.0 || activation_decay_l2 < 0.0) fail("activation decays must be >= 0");
}

// --------------------------------------------------------------- encoder

Encoder::Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  int c = cfg.first_conv_filters;
  first_ = nn::Conv2d(cfg.in_channels, c, 3, "first", rng);
  for (int l = 0; l < cfg.levels; ++l) {
    const std::string name = "down" + std::to_string(l);
    down_.emplace_back(c, cfg.block_depth, cfg.growth_rate, cfg.dropout, true, name, rng);
    c = down_.back().out_channels();
    skip_channels_.push_back(c);
    const int compressed = std::max(1, int(std::floor(c * cfg.compression)));
    trans_down_.emplace_back(c, compressed, cfg.dropout, "td" + std::to_string(l), rng);
    c = compressed;
  }
  bottleneck_ = nn::DenseBlock(c, cfg.bottleneck_layers, cfg.growth_rate, cfg.dropout, false, "bottleneck", rng);
  c = bottleneck_.out_channels();
  for (int l = cfg.levels - 1; l >= 0; --l) {
    trans_up_.emplace_back(c, c, "tu" + std::to_string(l), rng);
    c += skip_channels_[std::size_t(l)];
    up_.emplace_back(c, cfg.block_depth, cfg.growth_rate, cfg.dropout, l == 0, "up" + std::to_string(l), rng);
    c = up_.back().out_channels();
  }
  last_ = nn::Conv2d(c, cfg.out_channels, 1, "last", rng);
}

Encoder build_encoder(const EncoderConfig& cfg, std::uint64_t seed) { return Encoder(cfg, seed); }

nn::Tensor Encoder::forward(const nn::Tensor& x, bool train, nn::Rng& drop_rng) {
  const int g = cfg_.granularity();
  if (x.shape.height % g || x.shape.width % g) {
    throw std::invalid_argument("encoder input " + std::to_string(x.shape.height) + "x" +
                                std::to_string(x.shape.width) + " is not a multiple of " + std::to_string(g));
  }
  nn::Tensor h = first_.forward(x, train);
  std::vector<nn::Tensor> skips;
  for (int l = 0; l < cfg_.levels; ++l) {
    h = down_[std::size_t(l)].forward(h, train, drop_rng);
    skips.push_back(h);
    h = trans_down_[std::size_t(l)].forward(h, train, drop_rng);
  }
  h = bottleneck_.forward(h, train, drop_rng);
  for (std::size_t i = 0; i < up_.size(); ++i) {
    h = trans_up_[i].forward(h, train);
    h = up_[i].forward(nn::concat(h, skips[skips.size() - 1 - i]), train, drop_rng);
  }
  return last_.forward(h, train);
}

nn::Tensor Encoder::backward(const nn::Tensor& dy) {
  nn::Tensor d = last_.backward(dy);
  std::vector<nn::Matrix> dskips(up_.size());
  for (std::size_t i = up_.size(); i-- > 0;) {
    d = up_[i].backward(d);
    const int skip_rows = skip_channels_[skip_channels_.size() - 1 - i];
    const int up_rows = d.channels() - skip_rows;
    dskips[i] = d.data.bottomRows(skip_rows);
    d = trans_up_[i].backward(nn::Tensor(d.data.topRows(up_rows), d.shape));
  }
  d = bottleneck_.backward(d);
  for (int l = cfg_.levels - 1; l >= 0; --l) {
    d = trans_down_[std::size_t(l)].backward(d);
    d.data += dskips[up_.size() - 1 - std::size_t(l)];
    d = down_[std::size_t(l)].backward(d);
  }
  return first_.backward(d);
}

Image Encoder::infer(const Image& x) {
  if (x.channels() != cfg_.in_channels) {
    throw std::invalid_argument("encoder expects " + std::to_string(cfg_.in_channels) + " input channels, got " +
                                std::to_string(x.channels()));
  }
  const int g = cfg_.granularity();
  const int ph = (g - x.height() % g) % g;
  const int pw = (g - x.width() % g) % g;
  if ((ph > 0 && ph / 2 + ph % 2 >= x.height()) || (pw > 0 && pw / 2 + pw % 2 >= x.width())) {
    throw std::invalid_argument("input " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                                " is too small for reflect padding to a multiple of " + std::to_string(g));
  }
  const Image padded = (ph || pw) ? reflect_pad(x, ph / 2, ph - ph / 2, pw / 2, pw - pw / 2) : x;
  nn::Rng unused(0);
  const nn::Tensor y = forward(to_tensor({padded}), false, unused);
  Image out = to_images(y).front();
  if (ph || pw) out = crop(out, ph / 2, pw / 2, x.height(), x.width());
  out.set_modality(x.modality());
  out.set_value_range({-std::numeric_limits<float>::max(), std::numeric_limits<float>::max()});
  return out;
}

std::vector<nn::Param*> Encoder::parameters() {
  std::vector<nn::Param*> out;
  first_.collect(out);
  for (std::size_t l = 0; l < down_.size(); ++l) {
    down_[l].collect(out);
    trans_down_[l].collect(out);
  }
  bottleneck_.collect(out);
  for (std::size_t i = 0; i < up_.size(); ++i) {
    trans_up_[i].collect(out);
    up_[i].collect(out);
  }
  last_.collect(out);
  return out;
}

std::vector<nn::Buffer> Encoder::buffers() {
  std::vector<nn::Buffer> out;
  for (std::size_t l = 0; l < down_.size(); ++l) {
    down_[l].collect_buffers(out);
    trans_down_[l].collect_buffers(out);
  }
  bottleneck_.collect_buffers(out);
  for (auto& b : up_) b.collect_buffers(out);
  return out;
}

void Encoder::zero_grad() {
  for (nn::Param* p : parameters()) p->zero_grad();
}

std::size_t Encoder::parameter_count() {
  std::size_t n = 0;
  for (nn::Param* p : parameters()) n += std::size_t(p->value.size());
  return n;
}

std::uint64_t Encoder::parameter_hash() {
  std::uint64_t h = fnv1a("comir-encoder");
  for (nn::Param* p : parameters()) h = fnv1a(p->value.data(), sizeof(float) * std::size_t(p->value.size()), h);
  for (const nn::Buffer& b : buffers()) {
    h = fnv1a(b.value->data(), sizeof(float) * std::size_t(b.value->size()), h);
  }
  return h;
}

std::vector<std::string> Encoder::layer_list() const {
  std::vector<std::string> out;
  auto dense = [](const std::string& name, const nn::DenseBlock& b, int growth) {
    std::ostringstream s;
    s << name << ": dense(" << b.in_channels() << " -> " << b.out_channels() << ", depth " << b.depth()
      << ", growth " << growth << ")";
    return s.str();
  };
  out.push_back("first: conv3x3(" + std::to_string(first_.in_channels()) + " -> " +
                std::to_string(first_.out_channels()) + ")");
  for (std::size_t l = 0; l < down_.size(); ++l) {
    out.push_back(dense("down" + std::to_string(l), down_[l], cfg_.growth_rate));
    out.push_back("td" + std::to_string(l) + ": bn-relu-conv1x1(" + std::to_string(down_[l].out_channels()) +
                  " -> " + std::to_string(trans_down_[l].out_channels()) + ")-dropout-maxpool2");
  }
  out.push_back(dense("bottleneck", bottleneck_, cfg_.growth_rate));
  for (std::size_t i = 0; i < up_.size(); ++i) {
    const std::string l = std::to_string(up_.size() - 1 - i);
    out.push_back("tu" + l + ": upsample2-conv3x3(-> " + std::to_string(trans_up_[i].out_channels()) + ")");
    out.push_back(dense("up" + l, up_[i], cfg_.growth_rate));
  }
  out.push_back("last: conv1x1(" + std::to_string(last_.in_channels()) + " -> " +
                std::to_string(last_.out_channels()) + ")");
  return out;
}

// --------------------------------------------------------------- tensors

nn::Tensor to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("cannot batch an empty image list");
  const Image& first = images.front();
  nn::Tensor t(first.channels(), {int(images.size()), first.height(), first.width()});
  const Eigen::Index hw = first.pixel_count();
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& img = images[b];
    if (img.channels() != first.channels() || img.height() != first.height() || img.width() != first.width()) {
      throw std::invalid_argument("batched images must share one shape");
    }
    t.data.middleCols(Eigen::Index(b) * hw, hw) = img.pixels();
  }
  return t;
}

std::vector<Image> to_images(const nn::Tensor& t) {
  std::vector<Image> out;
  const Eigen::Index hw = t.shape.pixels();
  for (int b = 0; b < t.shape.batch; ++b) {
    out.emplace_back(PlaneMatrix(t.data.middleCols(b * hw, hw)), t.shape.height, t.shape.width);
  }
  return out;
}

// ------------------------------------------------------------- optimizer

void Optimizer::step(const std::vector<nn::Param*>& params) {
  if (first_.empty()) {
    for (nn::Param* p : params) {
      first_.push_back(nn::Matrix::Zero(p->value.rows(), p->value.cols()));
      if (cfg_.optimizer == OptimizerKind::adam) second_.push_back(nn::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const float lr = float(cfg_.learning_rate);
  const float wd = float(cfg_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    nn::Matrix g = p.grad;
    if (wd > 0.0f) g += wd * p.value;
    if (cfg_.optimizer == OptimizerKind::sgd) {
      first_[i] = float(cfg_.momentum) * first_[i] + g;
      p.value -= lr * first_[i];
    } else {
      const float b1 = float(cfg_.adam_beta1);
      const float b2 = float(cfg_.adam_beta2);
      first_[i] = b1 * first_[i] + (1.0f - b1) * g;
      second_[i] = b2 * second_[i] + (1.0f - b2) * g.cwiseProduct(g);
      const float c1 = 1.0f - float(std::pow(cfg_.adam_beta1, double(t_)));
      const float c2 = 1.0f - float(std::pow(cfg_.adam_beta2, double(t_)));
      p.value.array() -= lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + 1e-8f);
    }
  }
}

// -------------------------------------------------------------- training

int ComirModel::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i] == name) return int(i);
  }
  std::string known;
  for (const auto& m : modalities) known += (known.empty() ? "" : ", ") + m;
  throw std::invalid_argument("modality '" + name + "' is not part of the model (has: " + known + ")");
}

ComirModel train(const std::vector<MultimodalSample>& samples, const std::vector<std::string>& modalities,
                 const std::vector<EncoderConfig>& encoder_cfgs, const TrainConfig& cfg,
                 const AugmentationConfig& aug, const StepCallback& on_step) {
  cfg.validate();
  aug.validate();
  if (samples.empty()) throw TrainingError("training set is empty");
  const int m_count = int(modalities.size());
  if (m_count < 2) throw TrainingError("training needs at least two modalities");
  if (int(encoder_cfgs.size()) != m_count) throw TrainingError("one encoder configuration per modality is required");
  for (const auto& s : samples) {
    s.validate();
    if (int(s.images.size()) != m_count) {
      throw TrainingError("sample '" + s.id + "' has " + std::to_string(s.images.size()) + " modalities, expected " +
                          std::to_string(m_count));
    }
  }
  const int channels = encoder_cfgs.front().out_channels;
  for (const auto& e : encoder_cfgs) {
    if (e.out_channels != channels) throw TrainingError("all encoders must emit the same number of channels");
  }

  ComirModel model;
  model.modalities = modalities;
  model.encoder_configs = encoder_cfgs;
  model.train = cfg;
  for (int m = 0; m < m_count; ++m) {
    model.encoders.emplace_back(encoder_cfgs[std::size_t(m)], derive_seed(cfg.seed, "init", std::uint64_t(m)));
  }

  CriticSpec critic;
  critic.kind = cfg.critic;
  nn::Param bilinear;
  if (cfg.critic == CriticKind::bilinear) {
    nn::Rng rng(derive_seed(cfg.seed, "bilinear"));
    std::normal_distribution<float> noise(0.0f, 0.01f);
    bilinear.name = "critic.bilinear";
    bilinear.value = nn::Matrix::Identity(channels, channels);
    for (Eigen::Index i = 0; i < bilinear.value.size(); ++i) bilinear.value.data()[i] += noise(rng);
    bilinear.zero_grad();
  }

  std::vector<nn::Param*> params;
  for (auto& enc : model.encoders) {
    const auto p = enc.parameters();
    params.insert(params.end(), p.begin(), p.end());
  }
  if (cfg.critic == CriticKind::bilinear) params.push_back(&bilinear);

  Optimizer optimizer(cfg);
  std::mt19937_64 group_rng(derive_seed(cfg.seed, "group"));
  const C4Draw draw = uniform_c4(group_rng);
  std::vector<nn::Rng> drop_rngs;
  for (int m = 0; m < m_count; ++m) drop_rngs.emplace_back(derive_seed(cfg.seed, "dropout", std::uint64_t(m)));

  const int n = cfg.batch_size;
  for (long long step = 0; step < cfg.total_steps(); ++step) {
    const auto batch = sample_batch(samples, n, cfg.patch_size, aug, derive_seed(cfg.seed, "batch", std::uint64_t(step)));
    const auto draws = draw_group_elements(cfg.group, m_count, n, draw);
    if (cfg.critic == CriticKind::bilinear) critic.bilinear_weights = bilinear.value.cast<double>();

    // Forward: each patch is turned by its draw, encoded, and turned back.
    LatentBatch<double> latents;
    latents.modalities = m_count;
    latents.tuples = n;
    latents.channels = channels;
    std::vector<nn::Shape> shapes(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
      std::vector<Image> inputs;
      for (int k = 0; k < n; ++k) {
        inputs.push_back(rotate_c4(batch[std::size_t(k)].patches[std::size_t(m)], draws[std::size_t(m * n + k)]));
      }
      const nn::Tensor in = to_tensor(inputs);
      const nn::Tensor out = model.encoders[std::size_t(m)].forward(in, true, drop_rngs[std::size_t(m)]);
      shapes[std::size_t(m)] = out.shape;
      const auto outs = to_images(out);
      for (int k = 0; k < n; ++k) {
        const Image z = rotate_c4(outs[std::size_t(k)], draws[std::size_t(m * n + k)].inverse());
        if (latents.z.size() == 0) latents.z.resize(Eigen::Index(m_count) * n, z.pixels().size());
        latents.z.row(m * n + k) = Eigen::Map<const Eigen::VectorXf>(z.pixels().data(), z.pixels().size())
                                        .cast<double>()
                                        .transpose();
      }
    }

    if (!latents.z.allFinite()) throw TrainingError("non-finite encoder output at step " + std::to_string(step));
    LossGradient<double> lg = infonce_loss_with_gradient(latents, critic, cfg.temperature);
    double objective = lg.loss;
    const double count = double(latents.z.size());
    if (cfg.activation_decay_l1 > 0.0) {
      objective += cfg.activation_decay_l1 * latents.z.cwiseAbs().sum() / count;
      lg.dz.array() += cfg.activation_decay_l1 / count * latents.z.array().sign();
    }
    if (cfg.activation_decay_l2 > 0.0) {
      objective += cfg.activation_decay_l2 * latents.z.squaredNorm() / count;
      lg.dz += (2.0 * cfg.activation_decay_l2 / count) * latents.z;
    }
    if (!std::isfinite(objective)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (infonce " << lg.loss << ", max |z| "
          << latents.z.cwiseAbs().maxCoeff() << ")";
      throw TrainingError(msg.str());
    }

    // Backward: dL/dz is turned by g before entering the encoder.
    for (nn::Param* p : params) p->zero_grad();
    for (int m = 0; m < m_count; ++m) {
      const nn::Shape& s = shapes[std::size_t(m)];
      std::vector<Image> grads;
      for (int k = 0; k < n; ++k) {
        const C4Element g = draws[std::size_t(m * n + k)];
        // Patches are square, so the canonical latent shares the output shape.
        PlaneMatrix gm = lg.dz.row(m * n + k).cast<float>();
        gm.resize(channels, s.pixels());
        Image gi(std::move(gm), s.height, s.width);
        grads.push_back(rotate_c4(gi, g));
      }
      model.encoders[std::size_t(m)].backward(to_tensor(grads));
    }
    if (cfg.critic == CriticKind::bilinear) bilinear.grad = lg.dweights.cast<float>();

    double sq = 0.0;
    for (nn::Param* p : params) sq += p->grad.cast<double>().squaredNorm();
    StepRecord rec{step, objective, std::sqrt(sq), std::sqrt(sq)};
    if (!std::isfinite(rec.grad_norm)) throw TrainingError("non-finite gradient norm at step " + std::to_string(step));
    if (rec.grad_norm > cfg.gradient_norm_clip) {
      const float scale = float(cfg.gradient_norm_clip / rec.grad_norm);
      double sq_clipped = 0.0;
      for (nn::Param* p : params) {
        p->grad *= scale;
        sq_clipped += p->grad.cast<double>().squaredNorm();
      }
      rec.clipped_norm = std::sqrt(sq_clipped);
    }
    optimizer.step(params);
    model.history.push_back(rec);
    if (on_step) on_step(rec);
  }
  if (cfg.critic == CriticKind::bilinear) model.bilinear_weights = bilinear.value.cast<double>();
  return model;
}

double training_loss(const std::vector<std::function<Image(const Image&)>>& models,
                     const std::vector<PatchTuple>& batch, const CriticSpec& spec, const LossConfig& cfg,
                     const C4Draw& draw) {
  cfg.validate();
  const int m_count = cfg.modalities;
  const int n = int(batch.size());
  if (int(models.size()) != m_count) throw TrainingError("one model per modality is required");
  const auto draws = draw_group_elements(cfg.group, m_count, n, draw);
  LatentBatch<double> latents;
  latents.modalities = m_count;
  latents.tuples = n;
  for (int m = 0; m < m_count; ++m) {
    for (int k = 0; k < n; ++k) {
      const Image z = equivariant_latent(models[std::size_t(m)], batch[std::size_t(k)].patches[std::size_t(m)],
                                         draws[std::size_t(m * n + k)]);
      if (latents.z.size() == 0) {
        latents.channels = z.channels();
        latents.z.resize(Eigen::Index(m_count) * n, z.pixels().size());
      }
      if (z.pixels().size() != latents.z.cols()) throw TrainingError("latents differ in shape within a batch");
      latents.z.row(m * n + k) =
          Eigen::Map<const Eigen::VectorXf>(z.pixels().data(), z.pixels().size()).cast<double>().transpose();
    }
  }
  return infonce_loss(latents, spec, cfg.temperature);
}

Image infer_comir(ComirModel& model, const std::string& modality, const Image& img) {
  const int m = model.modality_index(modality);
  if (!img.modality().empty() && img.modality() != modality) {
    throw std::invalid_argument("image is tagged '" + img.modality() + "' but was routed to the '" + modality +
                                "' encoder");
  }
  Image out = model.encoders[std::size_t(m)].infer(img);
  out.set_modality(modality);
  if (!out.all_finite()) throw std::runtime_error("representation for '" + modality + "' is not finite");
  return out;
}

// ---------------------------------------------------------- visualisation

namespace {

float round_byte(double v) { return float(std::clamp(std::nearbyint(v), 0.0, 255.0)); }

double percentile(std::vector<float> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

}  // namespace

Image visualize_logistic(const Image& rep, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("logistic temperature must be positive");
  Image out(rep.channels(), rep.height(), rep.width(), rep.modality());
  const float* in = rep.pixels().data();
  float* dst = out.pixels().data();
  for (Eigen::Index i = 0; i < rep.pixels().size(); ++i) {
    dst[i] = round_byte(255.0 / (1.0 + std::exp(-double(in[i]) / temperature)));
  }
  out.set_value_range({0.0f, 255.0f});
  return out;
}

std::pair<Image, Image> visualize_joint_percentile(const Image& a, const Image& b) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("joint visualisation needs representations of equal shape");
  }
  auto values = [](const Image& img) {
    return std::vector<float>(img.pixels().data(), img.pixels().data() + img.pixels().size());
  };
  const auto va = values(a);
  const auto vb = values(b);
  const double lo = std::max(percentile(va, 1.0), percentile(vb, 1.0));
  const double hi = std::min(percentile(va, 99.0), percentile(vb, 99.0));
  const double span = hi > lo ? hi - lo : 1.0;
  auto render = [&](const Image& img) {
    Image out(img.channels(), img.height(), img.width(), img.modality());
    for (Eigen::Index i = 0; i < img.pixels().size(); ++i) {
      out.pixels().data()[i] = round_byte(255.0 * std::clamp((img.pixels().data()[i] - lo) / span, 0.0, 1.0));
    }
    out.set_value_range({0.0f, 255.0f});
    return out;
  };
  return {render(a), render(b)};
}

}  // namespace comir
