#include "comir/run_config.hpp"

#include "comir/data.hpp"

#include <cmath>
#include <cstdlib>

namespace comir {

namespace fs = std::filesystem;

namespace {

template <typename F>
void checked(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(section, e.what());
  }
}

template <typename Parse>
auto parse_enum(const KeyValueDoc& doc, const std::string& key, const std::string& fallback, Parse parse) {
  const std::string v = doc.get_string(key, fallback);
  try {
    return parse(v);
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

int get_int32(const KeyValueDoc& doc, const std::string& key, int fallback) {
  const long long v = doc.get_int(key, fallback);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(key, "integer out of range");
  return int(v);
}

std::vector<int> get_int_list(const KeyValueDoc& doc, const std::string& key, const std::vector<int>& fallback) {
  const std::vector<double> fb(fallback.begin(), fallback.end());
  std::vector<int> out;
  for (const double v : doc.get_double_list(key, fb)) {
    if (v != std::floor(v) || std::fabs(v) > INT32_MAX) throw ConfigError(key, "expected a list of integers");
    out.push_back(int(v));
  }
  return out;
}

std::uint64_t parse_seed(const std::string& text, const std::string& key) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "expected a non-negative integer seed, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError(key, "seed out of range: '" + text + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return fs::weakly_canonical(path.is_absolute() ? path : base / path);
}

}  // namespace

std::string to_string(InputKind k) { return k == InputKind::comir ? "comir" : "raw"; }

InputKind parse_input_kind(const std::string& name) {
  if (name == "comir") return InputKind::comir;
  if (name == "raw") return InputKind::raw;
  throw std::invalid_argument("expected comir or raw, got '" + name + "'");
}

RunConfig parse_run_config(const KeyValueDoc& doc, const fs::path& base_dir) {
  RunConfig c;

  // [run]
  c.output_dir = resolve(base_dir, doc.get_string("run.output_dir", "runs"));
  c.seed = parse_seed(doc.get_string("run.seed", "1"), "run.seed");
  if (const char* env = std::getenv(kSeedEnvironmentVariable); env && *env) {
    c.seed = parse_seed(env, kSeedEnvironmentVariable);
    c.seed_from_environment = true;
  }
  c.jobs = get_int32(doc, "run.jobs", 1);
  if (c.jobs < 1) throw ConfigError("run.jobs", "must be >= 1");

  // [dataset]
  c.dataset_descriptor = resolve(base_dir, doc.require_string("dataset.descriptor"));
  c.dataset_root = doc.has("dataset.root") ? resolve(base_dir, doc.get_string("dataset.root", ""))
                                           : c.dataset_descriptor.parent_path();

  // [encoder]
  c.encoder_preset = doc.get_string("encoder.preset", "desk");
  if (c.encoder_preset == "desk") {
    c.encoder = EncoderConfig::desk();
  } else if (c.encoder_preset == "paper") {
    c.encoder = EncoderConfig{};
  } else {
    throw ConfigError("encoder.preset", "expected desk or paper, got '" + c.encoder_preset + "'");
  }
  EncoderConfig& e = c.encoder;
  e.out_channels = get_int32(doc, "encoder.out_channels", e.out_channels);
  e.first_conv_filters = get_int32(doc, "encoder.first_conv_filters", e.first_conv_filters);
  e.levels = get_int32(doc, "encoder.levels", e.levels);
  e.block_depth = get_int32(doc, "encoder.block_depth", e.block_depth);
  e.growth_rate = get_int32(doc, "encoder.growth_rate", e.growth_rate);
  e.bottleneck_layers = get_int32(doc, "encoder.bottleneck_layers", e.bottleneck_layers);
  e.compression = doc.get_double("encoder.compression", e.compression);
  e.dropout = doc.get_double("encoder.dropout", e.dropout);
  e.pooling = doc.get_string("encoder.pooling", e.pooling);
  e.upsampling = doc.get_string("encoder.upsampling", e.upsampling);
  checked("encoder", [&] { e.validate(); });

  // [train] and [loss]
  TrainConfig& t = c.train;
  t.optimizer = parse_enum(doc, "train.optimizer", to_string(t.optimizer), parse_optimizer);
  t.learning_rate = doc.get_double("train.learning_rate", t.learning_rate);
  t.weight_decay = doc.get_double("train.weight_decay", t.weight_decay);
  t.momentum = doc.get_double("train.momentum", t.momentum);
  t.adam_beta1 = doc.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = doc.get_double("train.adam_beta2", t.adam_beta2);
  t.batch_size = get_int32(doc, "train.batch_size", t.batch_size);
  t.steps_per_epoch = get_int32(doc, "train.steps_per_epoch", t.steps_per_epoch);
  t.epochs = get_int32(doc, "train.epochs", t.epochs);
  t.patch_size = get_int32(doc, "train.patch_size", t.patch_size);
  t.gradient_norm_clip = doc.get_double("train.gradient_norm_clip", t.gradient_norm_clip);
  t.activation_decay_l1 = doc.get_double("train.activation_decay_l1", t.activation_decay_l1);
  t.activation_decay_l2 = doc.get_double("train.activation_decay_l2", t.activation_decay_l2);
  t.critic = parse_enum(doc, "loss.critic", to_string(t.critic), parse_critic);
  t.temperature = doc.get_double("loss.temperature", t.temperature);
  t.group = parse_enum(doc, "loss.group", to_string(t.group), parse_group);
  t.seed = c.seed;
  checked("train", [&] { t.validate(); });

  // [augmentation]
  c.augmentation_preset = doc.get_string("augmentation.preset", "default");
  if (c.augmentation_preset == "default") {
    c.augmentation = AugmentationConfig{};
  } else if (c.augmentation_preset == "none") {
    c.augmentation = AugmentationConfig::none();
  } else {
    throw ConfigError("augmentation.preset", "expected default or none, got '" + c.augmentation_preset + "'");
  }
  AugmentationConfig& a = c.augmentation;
  a.flip_prob = doc.get_double("augmentation.flip_prob", a.flip_prob);
  a.rotation_range = doc.get_double("augmentation.rotation_range", a.rotation_range);
  a.integer_degrees = doc.get_bool("augmentation.integer_degrees", a.integer_degrees);
  {
    std::vector<std::string> names;
    for (const Interpolation i : a.interpolation_choices) names.push_back(to_string(i));
    a.interpolation_choices.clear();
    for (const std::string& n : doc.get_list("augmentation.interpolation", names)) {
      try {
        a.interpolation_choices.push_back(parse_interpolation(n));
      } catch (const std::exception& ex) {
        throw ConfigError("augmentation.interpolation", ex.what());
      }
    }
  }
  a.photometric_prob = doc.get_double("augmentation.photometric_prob", a.photometric_prob);
  a.noise_sigma_max = doc.get_double("augmentation.noise_sigma_max", a.noise_sigma_max);
  a.blur_sigma = doc.get_double("augmentation.blur_sigma", a.blur_sigma);
  a.dropout_rate = doc.get_double("augmentation.dropout_rate", a.dropout_rate);
  a.dropout_superpixel_fraction =
      doc.get_double("augmentation.dropout_superpixel_fraction", a.dropout_superpixel_fraction);
  a.channel_gain_prob = doc.get_double("augmentation.channel_gain_prob", a.channel_gain_prob);
  a.gain_lo = doc.get_double("augmentation.gain_lo", a.gain_lo);
  a.gain_hi = doc.get_double("augmentation.gain_hi", a.gain_hi);
  checked("augmentation", [&] { a.validate(); });

  // [register]
  {
    std::vector<std::string> names;
    for (const Method m : c.methods) names.push_back(to_string(m));
    c.methods.clear();
    for (const std::string& n : doc.get_list("register.methods", names)) {
      try {
        c.methods.push_back(parse_method(n));
      } catch (const std::exception& ex) {
        throw ConfigError("register.methods", ex.what());
      }
    }
    if (c.methods.empty()) throw ConfigError("register.methods", "at least one method is required");
  }
  c.inputs = parse_enum(doc, "register.inputs", to_string(c.inputs), parse_input_kind);
  c.ref_modality = doc.get_string("register.ref_modality", "");
  c.flt_modality = doc.get_string("register.flt_modality", "");
  c.intensity_multistart = doc.get_bool("register.multistart", c.intensity_multistart);

  // [mi]
  c.mi_preset = doc.get_string("mi.preset", "desk");
  if (c.mi_preset == "desk") {
    c.registration.mi = MIConfig::desk();
  } else if (c.mi_preset == "paper") {
    c.registration.mi = MIConfig{};
  } else {
    throw ConfigError("mi.preset", "expected desk or paper, got '" + c.mi_preset + "'");
  }
  MIConfig& mi = c.registration.mi;
  mi.bins = get_int32(doc, "mi.bins", mi.bins);
  mi.spatial_samples = get_int32(doc, "mi.spatial_samples", mi.spatial_samples);
  mi.es_initial_radius = doc.get_double("mi.es_initial_radius", mi.es_initial_radius);
  mi.es_min_radius = doc.get_double("mi.es_min_radius", mi.es_min_radius);
  mi.es_growth = doc.get_double("mi.es_growth", mi.es_growth);
  mi.max_iterations = get_int32(doc, "mi.max_iterations", mi.max_iterations);
  mi.window = parse_enum(doc, "mi.window", to_string(mi.window), parse_parzen_window);
  mi.min_overlap_fraction = doc.get_double("mi.min_overlap_fraction", mi.min_overlap_fraction);
  checked("mi", [&] { mi.validate(); });

  // [intensity]
  IntensityConfig& in = c.registration.intensity;
  in.subsampling = get_int_list(doc, "intensity.subsampling", in.subsampling);
  in.sigmas = doc.get_double_list("intensity.sigmas", in.sigmas);
  in.iterations = get_int_list(doc, "intensity.iterations", in.iterations);
  in.step_sizes = doc.get_double_list("intensity.step_sizes", in.step_sizes);
  in.final_step = doc.get_double("intensity.final_step", in.final_step);
  in.momentum = doc.get_double("intensity.momentum", in.momentum);
  in.gradient_clip = doc.get_double("intensity.gradient_clip", in.gradient_clip);
  in.quantization_levels = get_int32(doc, "intensity.quantization_levels", in.quantization_levels);
  in.squash = parse_enum(doc, "intensity.squash", to_string(in.squash), parse_squash);
  in.sampling_fraction = doc.get_double("intensity.sampling_fraction", in.sampling_fraction);
  in.min_samples = get_int32(doc, "intensity.min_samples", in.min_samples);
  in.start_rotations = doc.get_double_list("intensity.start_rotations", in.start_rotations);
  checked("intensity", [&] { in.validate(); });
  if (c.intensity_multistart && in.start_rotations.empty()) {
    throw ConfigError("intensity.start_rotations", "multistart needs at least one start");
  }

  // [feature]
  FeatureConfig& f = c.registration.feature;
  f.descriptor_grid = get_int32(doc, "feature.descriptor_grid", f.descriptor_grid);
  f.orientation_bins = get_int32(doc, "feature.orientation_bins", f.orientation_bins);
  f.min_octave_size = get_int32(doc, "feature.min_octave_size", f.min_octave_size);
  f.max_octave_size = get_int32(doc, "feature.max_octave_size", f.max_octave_size);
  f.steps_per_octave = get_int32(doc, "feature.steps_per_octave", f.steps_per_octave);
  f.initial_sigma = doc.get_double("feature.initial_sigma", f.initial_sigma);
  f.contrast_threshold = doc.get_double("feature.contrast_threshold", f.contrast_threshold);
  f.edge_ratio = doc.get_double("feature.edge_ratio", f.edge_ratio);
  f.ratio_test = doc.get_double("feature.ratio_test", f.ratio_test);
  f.min_keypoints = get_int32(doc, "feature.min_keypoints", f.min_keypoints);
  f.ransac.threshold = doc.get_double("feature.ransac_threshold", f.ransac.threshold);
  f.ransac.iterations = get_int32(doc, "feature.ransac_iterations", f.ransac.iterations);
  f.ransac.min_inliers = get_int32(doc, "feature.min_inliers", f.ransac.min_inliers);
  checked("feature", [&] { f.validate(); });

  // [eval]
  EvalSettings& ev = c.eval;
  ev.quotas.small = get_int32(doc, "eval.small", ev.quotas.small);
  ev.quotas.medium = get_int32(doc, "eval.medium", ev.quotas.medium);
  ev.quotas.large = get_int32(doc, "eval.large", ev.quotas.large);
  if (ev.quotas.small < 0 || ev.quotas.medium < 0 || ev.quotas.large < 0) {
    throw ConfigError("eval.small", "stratum quotas must be >= 0");
  }
  ev.pair_size = get_int32(doc, "eval.pair_size", ev.pair_size);
  if (ev.pair_size < 16) throw ConfigError("eval.pair_size", "must be >= 16");
  EvalProtocol& p = ev.protocol;
  p.side = doc.get_double("eval.side", p.side);
  p.max_rotation_deg = doc.get_double("eval.max_rotation_deg", p.max_rotation_deg);
  p.max_translation = doc.get_double("eval.max_translation", p.max_translation);
  p.small_limit = doc.get_double("eval.small_limit", p.small_limit);
  p.medium_limit = doc.get_double("eval.medium_limit", p.medium_limit);
  p.failure_threshold = doc.get_double("eval.failure_threshold", p.failure_threshold);
  checked("eval", [&] { p.validate(); });
  ev.samples = doc.get_list("eval.samples", ev.samples);
  ev.bootstrap_resamples = get_int32(doc, "eval.bootstrap_resamples", ev.bootstrap_resamples);
  if (ev.bootstrap_resamples < 1000) throw ConfigError("eval.bootstrap_resamples", "must be >= 1000");
  ev.confidence = doc.get_double("eval.confidence", ev.confidence);
  if (!(ev.confidence > 0.0 && ev.confidence < 1.0)) throw ConfigError("eval.confidence", "must be in (0, 1)");
  return c;
}

RunConfig validate_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  const KeyValueDoc doc = KeyValueDoc::parse_file(path);
  RunConfig c = parse_run_config(doc, fs::absolute(path).parent_path());
  doc.reject_unknown();
  c.source = fs::absolute(path);
  if (!fs::is_regular_file(c.dataset_descriptor)) {
    throw ConfigError("dataset.descriptor", "file not found: " + c.dataset_descriptor.string());
  }
  if (!fs::is_directory(c.dataset_root)) {
    throw ConfigError("dataset.root", "directory not found: " + c.dataset_root.string());
  }
  // The descriptor must parse too; its own errors name its keys.
  LayoutDescriptor::parse_file(c.dataset_descriptor);
  return c;
}

KeyValueDoc RunConfig::echo() const {
  KeyValueDoc d;
  d.set("run.output_dir", output_dir.string());
  d.set("run.seed", std::to_string(seed));
  d.set("run.jobs", jobs);
  d.set("dataset.descriptor", dataset_descriptor.string());
  d.set("dataset.root", dataset_root.string());

  d.set("encoder.preset", encoder_preset);
  d.set("encoder.out_channels", encoder.out_channels);
  d.set("encoder.first_conv_filters", encoder.first_conv_filters);
  d.set("encoder.levels", encoder.levels);
  d.set("encoder.block_depth", encoder.block_depth);
  d.set("encoder.growth_rate", encoder.growth_rate);
  d.set("encoder.bottleneck_layers", encoder.bottleneck_layers);
  d.set("encoder.compression", encoder.compression);
  d.set("encoder.dropout", encoder.dropout);
  d.set("encoder.pooling", encoder.pooling);
  d.set("encoder.upsampling", encoder.upsampling);

  d.set("train.optimizer", to_string(train.optimizer));
  d.set("train.learning_rate", train.learning_rate);
  d.set("train.weight_decay", train.weight_decay);
  d.set("train.momentum", train.momentum);
  d.set("train.adam_beta1", train.adam_beta1);
  d.set("train.adam_beta2", train.adam_beta2);
  d.set("train.batch_size", train.batch_size);
  d.set("train.steps_per_epoch", train.steps_per_epoch);
  d.set("train.epochs", train.epochs);
  d.set("train.patch_size", train.patch_size);
  d.set("train.gradient_norm_clip", train.gradient_norm_clip);
  d.set("train.activation_decay_l1", train.activation_decay_l1);
  d.set("train.activation_decay_l2", train.activation_decay_l2);
  d.set("loss.critic", to_string(train.critic));
  d.set("loss.temperature", train.temperature);
  d.set("loss.group", to_string(train.group));

  d.set("augmentation.preset", augmentation_preset);
  d.set("augmentation.flip_prob", augmentation.flip_prob);
  d.set("augmentation.rotation_range", augmentation.rotation_range);
  d.set("augmentation.integer_degrees", augmentation.integer_degrees);
  std::vector<std::string> interp;
  for (const Interpolation i : augmentation.interpolation_choices) interp.push_back(to_string(i));
  d.set("augmentation.interpolation", interp);
  d.set("augmentation.photometric_prob", augmentation.photometric_prob);
  d.set("augmentation.noise_sigma_max", augmentation.noise_sigma_max);
  d.set("augmentation.blur_sigma", augmentation.blur_sigma);
  d.set("augmentation.dropout_rate", augmentation.dropout_rate);
  d.set("augmentation.dropout_superpixel_fraction", augmentation.dropout_superpixel_fraction);
  d.set("augmentation.channel_gain_prob", augmentation.channel_gain_prob);
  d.set("augmentation.gain_lo", augmentation.gain_lo);
  d.set("augmentation.gain_hi", augmentation.gain_hi);

  std::vector<std::string> ms;
  for (const Method m : methods) ms.push_back(to_string(m));
  d.set("register.methods", ms);
  d.set("register.inputs", to_string(inputs));
  d.set("register.ref_modality", ref_modality);
  d.set("register.flt_modality", flt_modality);
  d.set("register.multistart", intensity_multistart);

  const MIConfig& mi = registration.mi;
  d.set("mi.preset", mi_preset);
  d.set("mi.bins", mi.bins);
  d.set("mi.spatial_samples", mi.spatial_samples);
  d.set("mi.es_initial_radius", mi.es_initial_radius);
  d.set("mi.es_min_radius", mi.es_min_radius);
  d.set("mi.es_growth", mi.es_growth);
  d.set("mi.max_iterations", mi.max_iterations);
  d.set("mi.window", to_string(mi.window));
  d.set("mi.min_overlap_fraction", mi.min_overlap_fraction);

  const IntensityConfig& in = registration.intensity;
  auto as_doubles = [](const std::vector<int>& v) { return std::vector<double>(v.begin(), v.end()); };
  d.set("intensity.subsampling", as_doubles(in.subsampling));
  d.set("intensity.sigmas", in.sigmas);
  d.set("intensity.iterations", as_doubles(in.iterations));
  d.set("intensity.step_sizes", in.step_sizes);
  d.set("intensity.final_step", in.final_step);
  d.set("intensity.momentum", in.momentum);
  d.set("intensity.gradient_clip", in.gradient_clip);
  d.set("intensity.quantization_levels", in.quantization_levels);
  d.set("intensity.squash", to_string(in.squash));
  d.set("intensity.sampling_fraction", in.sampling_fraction);
  d.set("intensity.min_samples", in.min_samples);
  d.set("intensity.start_rotations", in.start_rotations);

  const FeatureConfig& f = registration.feature;
  d.set("feature.descriptor_grid", f.descriptor_grid);
  d.set("feature.orientation_bins", f.orientation_bins);
  d.set("feature.min_octave_size", f.min_octave_size);
  d.set("feature.max_octave_size", f.max_octave_size);
  d.set("feature.steps_per_octave", f.steps_per_octave);
  d.set("feature.initial_sigma", f.initial_sigma);
  d.set("feature.contrast_threshold", f.contrast_threshold);
  d.set("feature.edge_ratio", f.edge_ratio);
  d.set("feature.ratio_test", f.ratio_test);
  d.set("feature.min_keypoints", f.min_keypoints);
  d.set("feature.ransac_threshold", f.ransac.threshold);
  d.set("feature.ransac_iterations", f.ransac.iterations);
  d.set("feature.min_inliers", f.ransac.min_inliers);

  d.set("eval.small", eval.quotas.small);
  d.set("eval.medium", eval.quotas.medium);
  d.set("eval.large", eval.quotas.large);
  d.set("eval.pair_size", eval.pair_size);
  d.set("eval.side", eval.protocol.side);
  d.set("eval.max_rotation_deg", eval.protocol.max_rotation_deg);
  d.set("eval.max_translation", eval.protocol.max_translation);
  d.set("eval.small_limit", eval.protocol.small_limit);
  d.set("eval.medium_limit", eval.protocol.medium_limit);
  d.set("eval.failure_threshold", eval.protocol.failure_threshold);
  d.set("eval.samples", eval.samples);
  d.set("eval.bootstrap_resamples", eval.bootstrap_resamples);
  d.set("eval.confidence", eval.confidence);
  return d;
}

}  // namespace comir
