#include "comir/pipeline.hpp"

#include "comir/equivariance.hpp"
#include "comir/image_io.hpp"
#include "comir/seed.hpp"
#include "comir/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace comir {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw StageError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// JSON has no infinity; failures and undefined statistics become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : (v > 0 ? "inf" : "nan"); }

json transform_json(const RigidTransform2D& t) {
  return {{"angle", t.angle}, {"tx", t.translation.x()}, {"ty", t.translation.y()},
          {"cx", t.center.x()}, {"cy", t.center.y()}};
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".tif" || ext == ".tiff" || ext == ".png";
}

ComirModel load_model(const fs::path& checkpoint) {
  if (!fs::is_regular_file(checkpoint)) throw ConfigError("checkpoint", "file not found: " + checkpoint.string());
  return load_checkpoint(checkpoint);
}

// Logistic rendering scaled back to [0, 1] for the PNG writer; wide
// representations show their first three channels.
Image visualization(const Image& rep) {
  Image v = visualize_logistic(rep);
  if (v.channels() > 4) v = v.select_channels({0, 1, 2});
  v.pixels() /= 255.0f;
  return v;
}

Dataset load_configured_dataset(const RunConfig& cfg, Manifest& manifest) {
  manifest.add_input(cfg.dataset_descriptor);
  const LayoutDescriptor layout = LayoutDescriptor::parse_file(cfg.dataset_descriptor);
  Dataset ds = load_dataset(cfg.dataset_root, layout);
  if (ds.samples.empty()) throw StageError("dataset has no samples");
  return ds;
}

std::vector<std::string> modality_names(const Dataset& ds) {
  std::vector<std::string> names;
  for (const ModalitySpec& m : ds.layout.modalities) names.push_back(m.name);
  return names;
}

int index_of(const std::vector<std::string>& names, const std::string& name, const std::string& key) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError(key, "unknown modality '" + name + "' (dataset has: " + known + ")");
  }
  return int(it - names.begin());
}

ComirModel train_model(const std::vector<MultimodalSample>& samples, const std::vector<std::string>& names,
                       const std::vector<EncoderConfig>& encoders, const TrainConfig& train_cfg,
                       const AugmentationConfig& aug, long long total_steps) {
  const auto t0 = Clock::now();
  const long long every = std::max<long long>(1, total_steps / 20);
  return train(samples, names, encoders, train_cfg, aug, [&](const StepRecord& r) {
    if ((r.step + 1) % every == 0 || r.step + 1 == total_steps) {
      char line[128];
      std::snprintf(line, sizeof(line), "train: step %lld/%lld loss %.6g (%.1f s)\n", (long long)(r.step + 1),
                    total_steps, r.loss, seconds_since(t0));
      std::cerr << line;
    }
  });
}

}  // namespace

// ------------------------------------------------------------------ plumbing

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("cannot hash '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a(buf, std::size_t(in.gcount()), h);
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

fs::path create_run_dir(const fs::path& parent, const std::string& command, const std::optional<fs::path>& out) {
  if (out) {
    const fs::path dir = fs::absolute(*out);
    if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
      throw ConfigError("--out", "output directory exists and is not empty: " + dir.string());
    }
    fs::create_directories(dir);
    return dir;
  }
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  fs::create_directories(parent);
  for (int k = 0;; ++k) {
    const fs::path dir = fs::absolute(parent / (command + "-" + stamp + (k ? "-" + std::to_string(k) : "")));
    if (fs::create_directory(dir)) return dir;
  }
}

Manifest::Manifest(std::string command, fs::path run_dir) : command_(std::move(command)), run_dir_(std::move(run_dir)) {}

void Manifest::set_config(const RunConfig& cfg) {
  extra_["config"] = cfg.echo().dump();
  if (!cfg.source.empty()) add_input(cfg.source);
  add_seed("root", cfg.seed);
  extra_["seed_from_environment"] = cfg.seed_from_environment;
}

void Manifest::add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
void Manifest::add_input(const fs::path& p) { inputs_.push_back(fs::absolute(p)); }
void Manifest::add_output(const fs::path& p) { outputs_.push_back(fs::absolute(p)); }
void Manifest::set(const std::string& key, json value) { extra_[key] = std::move(value); }

void Manifest::add_timing(const std::string& stage, const std::string& item, double seconds) {
  timing_.push_back({stage, item, seconds});
}

void Manifest::write() {
  auto listing = [](const std::vector<fs::path>& paths) {
    json out = json::array();
    std::set<fs::path> seen;
    for (const fs::path& p : paths) {
      if (!seen.insert(p).second) continue;
      json e = {{"path", p.string()}};
      if (fs::is_regular_file(p)) e["fnv1a"] = file_hash(p);
      out.push_back(e);
    }
    return out;
  };
  const fs::path timing_path = run_dir_ / "timing.csv";
  write_text(timing_path, timing_csv(timing_report(timing_)));
  json m = extra_;
  m["tool"] = "comir";
  m["version"] = kToolVersion;
  m["command"] = command_;
  m["run_dir"] = run_dir_.string();
  m["seeds"] = seeds_;
  m["inputs"] = listing(inputs_);
  m["outputs"] = listing(outputs_);
  write_text(run_dir_ / "manifest.json", m.dump(2) + "\n");
}

// ------------------------------------------------------------------ samples

std::vector<MultimodalSample> training_samples(const Dataset& ds) {
  return ds.layout.split.train.empty() ? ds.samples : ds.subset(ds.layout.split.train);
}

std::vector<MultimodalSample> evaluation_samples(const Dataset& ds, const EvalSettings& eval) {
  if (!eval.samples.empty()) return ds.subset(eval.samples);
  return ds.layout.split.test.empty() ? ds.samples : ds.subset(ds.layout.split.test);
}

// ------------------------------------------------------------------ train

fs::path run_train(const RunConfig& cfg, Manifest& manifest) {
  const Dataset ds = load_configured_dataset(cfg, manifest);
  const std::vector<MultimodalSample> samples = training_samples(ds);
  if (samples.empty()) throw StageError("no training samples");
  const std::vector<std::string> names = modality_names(ds);

  std::vector<EncoderConfig> encoders;
  for (std::size_t m = 0; m < names.size(); ++m) {
    EncoderConfig e = cfg.encoder;
    e.in_channels = samples.front().images[m].channels();
    encoders.push_back(e);
  }
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  manifest.add_seed("train", train.seed);

  const long long total = train.total_steps();
  const auto t0 = Clock::now();
  ComirModel model = train_model(samples, names, encoders, train, cfg.augmentation, total);
  manifest.add_timing("train", "model", seconds_since(t0));

  const fs::path ckpt = manifest.run_dir() / "checkpoint.ckpt";
  const fs::path loss = manifest.run_dir() / "loss.csv";
  save_checkpoint(ckpt, model);
  write_loss_csv(loss, model.history);
  manifest.add_output(ckpt);
  manifest.add_output(loss);
  return ckpt;
}

// ------------------------------------------------------------------ infer

void run_infer(const fs::path& checkpoint, const fs::path& input_dir, const std::optional<std::string>& modality,
               Manifest& manifest) {
  if (!fs::is_directory(input_dir)) throw ConfigError("--input", "not a directory: " + input_dir.string());
  ComirModel model = load_model(checkpoint);
  manifest.add_input(checkpoint);
  const std::string mod = modality.value_or(model.modalities.front());
  try {
    model.modality_index(mod);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--modality", e.what());
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw StageError("no .tif/.tiff/.png images in " + input_dir.string());

  for (const fs::path& f : files) {
    const auto t0 = Clock::now();
    Image img = read_image(f);
    img.set_modality("");
    const Image rep = infer_comir(model, mod, img);
    const fs::path tif = manifest.run_dir() / (f.stem().string() + ".tif");
    const fs::path png = manifest.run_dir() / (f.stem().string() + ".png");
    write_tiff(tif, rep, SampleFormat::float32);
    write_png(png, visualization(rep));
    manifest.add_timing("infer", f.filename().string(), seconds_since(t0));
    manifest.add_input(f);
    manifest.add_output(tif);
    manifest.add_output(png);
  }
  manifest.set("modality", mod);
}

// ------------------------------------------------------------------ register

namespace {

struct PairJob {
  int index = 0;
  std::string sample;
  EvalTransform truth;
  Image reference;
  Image floating;
};

json registration_record(const PairJob& job, const RegistrationResult& r, int size, std::uint64_t seed) {
  const double err = r.success ? registration_error(job.truth.transform, r.transform, size, size) : kFailedRegistration;
  const Point2D c((size - 1) / 2.0, (size - 1) / 2.0);
  json rec = {{"pair", job.index},
              {"sample", job.sample},
              {"method", to_string(r.method)},
              {"stratum", to_string(job.truth.stratum)},
              {"displacement", job.truth.displacement},
              {"truth", transform_json(job.truth.transform.about(c))},
              {"success", r.success},
              {"estimate", r.success ? transform_json(r.transform.about(c)) : json(nullptr)},
              {"error", number_or_null(err)},
              {"objective", number_or_null(r.objective)},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"runtime_seconds", r.runtime_seconds},
              {"seed", seed},
              {"message", r.message}};
  return rec;
}

}  // namespace

void run_register(const RunConfig& cfg, const RegisterOptions& opt, Manifest& manifest) {
  const std::vector<Method> methods = opt.methods.empty() ? cfg.methods : opt.methods;
  if (cfg.inputs == InputKind::comir && !opt.checkpoint) {
    throw ConfigError("--checkpoint", "CoMIR inputs requested (register.inputs = comir) but no checkpoint given");
  }
  std::optional<ComirModel> model;
  if (opt.checkpoint && cfg.inputs == InputKind::comir) {
    model = load_model(*opt.checkpoint);
    manifest.add_input(*opt.checkpoint);
  }

  const Dataset ds = load_configured_dataset(cfg, manifest);
  const std::vector<std::string> names = modality_names(ds);
  const std::string ref_name =
      !opt.ref_modality.empty() ? opt.ref_modality : (!cfg.ref_modality.empty() ? cfg.ref_modality : names.front());
  const int ref_idx = index_of(names, ref_name, "--ref-modality");
  int flt_idx = ref_idx == 0 ? 1 : 0;
  if (!cfg.flt_modality.empty()) flt_idx = index_of(names, cfg.flt_modality, "register.flt_modality");
  if (flt_idx == ref_idx) throw ConfigError("register.flt_modality", "must differ from the reference modality");

  const std::vector<MultimodalSample> samples = evaluation_samples(ds, cfg.eval);
  if (samples.empty()) throw StageError("no evaluation samples");
  const int size = cfg.eval.pair_size;
  const EvalProtocol protocol = cfg.eval.scaled_protocol();
  const std::uint64_t transform_seed = derive_seed(cfg.seed, "eval-transforms");
  manifest.add_seed("eval_transforms", transform_seed);
  const std::vector<EvalTransform> transforms =
      generate_eval_transforms(cfg.eval.quotas.total(), cfg.eval.quotas, transform_seed, size, size, protocol);

  // Pairs (and CoMIRs) are prepared serially; only registration runs in parallel.
  std::vector<PairJob> jobs;
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    const MultimodalSample& s = samples[i % samples.size()];
    PairJob job;
    job.index = int(i);
    job.sample = s.id;
    job.truth = transforms[i];
    EvalPair pair = make_eval_pair(s.images[std::size_t(ref_idx)], s.images[std::size_t(flt_idx)], transforms[i].transform, size);
    if (model) {
      const auto t0 = Clock::now();
      pair.reference.set_modality("");
      pair.floating.set_modality("");
      job.reference = infer_comir(*model, names[std::size_t(ref_idx)], pair.reference);
      job.floating = infer_comir(*model, names[std::size_t(flt_idx)], pair.floating);
      manifest.add_timing("infer", "pair" + std::to_string(i), seconds_since(t0));
    } else {
      job.reference = std::move(pair.reference);
      job.floating = std::move(pair.floating);
    }
    jobs.push_back(std::move(job));
  }

  const std::size_t total = jobs.size() * methods.size();
  std::vector<json> records(total);
  std::vector<double> runtimes(total, 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next++;
      if (k >= total) return;
      const PairJob& job = jobs[k / methods.size()];
      const Method method = methods[k % methods.size()];
      const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, "register", std::uint64_t(job.index)), to_string(method));
      try {
        RegistrationResult r;
        const auto t0 = Clock::now();
        if (method == Method::intensity && cfg.intensity_multistart) {
          r = register_multistart(method, job.reference, job.floating,
                                  rotation_starts(job.reference, cfg.registration.intensity.start_rotations),
                                  cfg.registration, seed);
        } else {
          r = register_once(method, job.reference, job.floating, cfg.registration, seed);
        }
        r.runtime_seconds = seconds_since(t0);
        records[k] = registration_record(job, r, size, seed);
        runtimes[k] = r.runtime_seconds;
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "register: pair " << job.index << " " << to_string(method) << " error "
                  << csv_number(r.success ? registration_error(job.truth.transform, r.transform, size, size)
                                          : kFailedRegistration)
                  << "\n";
      } catch (const RegistrationError& e) {
        RegistrationResult r;
        r.method = method;
        r.success = false;
        r.message = e.what();
        records[k] = registration_record(job, r, size, seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(opt.jobs, int(total)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t k = 0; k < total; ++k) {
    manifest.add_timing("register", "pair" + std::to_string(k / methods.size()) + ":" + to_string(methods[k % methods.size()]),
                        runtimes[k]);
  }

  json pairs = json::array();
  for (const PairJob& job : jobs) {
    pairs.push_back({{"pair", job.index},
                     {"sample", job.sample},
                     {"stratum", to_string(job.truth.stratum)},
                     {"displacement", job.truth.displacement},
                     {"truth", transform_json(job.truth.transform)}});
  }
  std::vector<std::string> method_names;
  for (const Method m : methods) method_names.push_back(to_string(m));
  const json protocol_json = {{"pair_size", size},
                              {"side", protocol.side},
                              {"failure_threshold", protocol.failure_threshold},
                              {"quotas", {{"small", cfg.eval.quotas.small}, {"medium", cfg.eval.quotas.medium}, {"large", cfg.eval.quotas.large}}},
                              {"inputs", to_string(cfg.inputs)},
                              {"ref_modality", names[std::size_t(ref_idx)]},
                              {"flt_modality", names[std::size_t(flt_idx)]},
                              {"methods", method_names},
                              {"seed", cfg.seed},
                              {"bootstrap_resamples", cfg.eval.bootstrap_resamples},
                              {"confidence", cfg.eval.confidence},
                              {"pairs", pairs}};
  const fs::path pairs_path = manifest.run_dir() / "pairs.json";
  write_text(pairs_path, protocol_json.dump(2) + "\n");
  std::string lines;
  for (const json& r : records) lines += r.dump() + "\n";
  const fs::path records_path = manifest.run_dir() / "registrations.jsonl";
  write_text(records_path, lines);
  manifest.add_output(pairs_path);
  manifest.add_output(records_path);
}

// ------------------------------------------------------------------ evaluate

namespace {

json interval_json(const BinomialInterval& ci) {
  return {{"count", ci.successes},
          {"trials", ci.trials},
          {"count_lo", ci.count_lo},
          {"count_hi", ci.count_hi},
          {"proportion", ci.point},
          {"lo", ci.lo},
          {"hi", ci.hi},
          {"level", ci.level}};
}

}  // namespace

void run_evaluate(const fs::path& results_dir, Manifest& manifest) {
  const fs::path pairs_path = results_dir / "pairs.json";
  const fs::path records_path = results_dir / "registrations.jsonl";
  if (!fs::is_regular_file(pairs_path) || !fs::is_regular_file(records_path)) {
    throw ConfigError("--results", "expected pairs.json and registrations.jsonl in " + results_dir.string());
  }
  manifest.add_input(pairs_path);
  manifest.add_input(records_path);
  json protocol;
  std::vector<json> records;
  try {
    protocol = json::parse(read_text(pairs_path));
    std::istringstream in(read_text(records_path));
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) records.push_back(json::parse(line));
    }
  } catch (const json::exception& e) {
    throw StageError(std::string("malformed registration results: ") + e.what());
  }

  const int size = protocol.at("pair_size").get<int>();
  const double threshold = protocol.at("failure_threshold").get<double>();
  const double confidence = protocol.at("confidence").get<double>();
  const auto method_names = protocol.at("methods").get<std::vector<std::string>>();
  const std::size_t n_pairs = protocol.at("pairs").size();
  if (n_pairs == 0) throw StageError("no registration pairs to evaluate");

  // errors[method][pair]
  std::vector<std::vector<double>> errors(method_names.size(), std::vector<double>(n_pairs, kFailedRegistration));
  std::vector<std::vector<bool>> seen(method_names.size(), std::vector<bool>(n_pairs, false));
  std::vector<double> displacement(n_pairs, 0.0);
  std::vector<std::string> strata(n_pairs), sample_ids(n_pairs);
  for (const json& p : protocol.at("pairs")) {
    const std::size_t i = p.at("pair").get<std::size_t>();
    if (i >= n_pairs) throw StageError("pair index out of range in pairs.json");
    displacement[i] = p.at("displacement").get<double>();
    strata[i] = p.at("stratum").get<std::string>();
    sample_ids[i] = p.at("sample").get<std::string>();
  }
  for (const json& r : records) {
    const auto it = std::find(method_names.begin(), method_names.end(), r.at("method").get<std::string>());
    const std::size_t i = r.at("pair").get<std::size_t>();
    if (it == method_names.end() || i >= n_pairs) throw StageError("registration record does not match pairs.json");
    const std::size_t m = std::size_t(it - method_names.begin());
    errors[m][i] = r.at("error").is_null() ? kFailedRegistration : r.at("error").get<double>();
    seen[m][i] = true;
  }
  for (std::size_t m = 0; m < method_names.size(); ++m) {
    for (std::size_t i = 0; i < n_pairs; ++i) {
      if (!seen[m][i]) throw StageError("missing record for pair " + std::to_string(i) + " / " + method_names[m]);
    }
  }

  json methods = json::array();
  std::ostringstream per_pair;
  per_pair << "pair,sample,stratum,displacement,method,error,success\n";
  for (std::size_t m = 0; m < method_names.size(); ++m) {
    const std::vector<double>& e = errors[m];
    const SuccessCounts sc = success_counts(e, size, threshold);
    const ECDFCurve curve = ecdf(e, threshold, size);
    int failures = 0;
    for (const double v : e) failures += std::isfinite(v) ? 0 : 1;
    json strata_json = json::object();
    for (const Stratum s : {Stratum::small, Stratum::medium, Stratum::large}) {
      int trials = 0, ok = 0;
      for (std::size_t i = 0; i < n_pairs; ++i) {
        if (strata[i] != to_string(s)) continue;
        ++trials;
        ok += e[i] < threshold ? 1 : 0;
      }
      strata_json[to_string(s)] = {{"trials", trials}, {"success", ok}};
    }
    double rho = std::numeric_limits<double>::quiet_NaN();
    try {
      rho = spearman(displacement, e);
    } catch (const std::exception&) {
    }
    methods.push_back({{"method", method_names[m]},
                       {"trials", sc.trials},
                       {"failures", failures},
                       {"median_error", number_or_null(quantile_sorted(curve.errors, 0.5))},
                       {"success_1pct", interval_json(clopper_pearson(sc.below_1pct, sc.trials, confidence))},
                       {"success_5pct", interval_json(clopper_pearson(sc.below_5pct, sc.trials, confidence))},
                       {"success_threshold", interval_json(clopper_pearson(sc.below_abs, sc.trials, confidence))},
                       {"strata", strata_json},
                       {"spearman_error_displacement", number_or_null(rho)}});

    std::ostringstream ec;
    ec << "error,relative_error,fraction\n";
    for (std::size_t i = 0; i < curve.errors.size(); ++i) {
      ec << csv_number(curve.errors[i]) << ',' << csv_number(curve.errors[i] / curve.scale) << ','
         << format_double(curve.fractions[i]) << '\n';
    }
    const fs::path ecdf_path = manifest.run_dir() / ("ecdf_" + method_names[m] + ".csv");
    write_text(ecdf_path, ec.str());
    manifest.add_output(ecdf_path);
    for (std::size_t i = 0; i < n_pairs; ++i) {
      per_pair << i << ',' << sample_ids[i] << ',' << strata[i] << ',' << format_double(displacement[i]) << ','
               << method_names[m] << ',' << csv_number(e[i]) << ',' << (e[i] < threshold ? 1 : 0) << '\n';
    }
  }

  json tests = json::array();
  for (std::size_t a = 0; a < method_names.size(); ++a) {
    for (std::size_t b = a + 1; b < method_names.size(); ++b) {
      json t = {{"a", method_names[a]}, {"b", method_names[b]}};
      try {
        t["p_value"] = wilcoxon_signed_rank(errors[a], errors[b]);
      } catch (const std::exception& ex) {
        t["p_value"] = nullptr;
        t["note"] = ex.what();
      }
      tests.push_back(t);
    }
  }

  const SuccessCounts thresholds = success_counts({0.0}, size, threshold);
  json summary = {{"pairs", n_pairs},
                  {"pair_size", size},
                  {"inputs", protocol.at("inputs")},
                  {"ref_modality", protocol.at("ref_modality")},
                  {"flt_modality", protocol.at("flt_modality")},
                  {"thresholds",
                   {{"one_percent_px", thresholds.threshold_1pct},
                    {"five_percent_px", thresholds.threshold_5pct},
                    {"failure_px", threshold}}},
                  {"methods", methods},
                  {"wilcoxon", tests}};
  const fs::path summary_path = manifest.run_dir() / "summary.json";
  const fs::path per_pair_path = manifest.run_dir() / "per_pair.csv";
  write_text(summary_path, summary.dump(2) + "\n");
  write_text(per_pair_path, per_pair.str());
  manifest.add_output(summary_path);
  manifest.add_output(per_pair_path);
}

// ------------------------------------------------------------------ equivariance

void run_equivariance(const fs::path& checkpoint, const fs::path& image, double step_degrees,
                      const std::optional<std::string>& modality, Manifest& manifest) {
  if (!fs::is_regular_file(image)) throw ConfigError("--image", "file not found: " + image.string());
  if (!(step_degrees > 0.0) || std::fmod(360.0, step_degrees) != 0.0) {
    throw ConfigError("--step", "step must be positive and divide 360");
  }
  ComirModel model = load_model(checkpoint);
  manifest.add_input(checkpoint);
  manifest.add_input(image);
  const std::string mod = modality.value_or(model.modalities.front());
  try {
    model.modality_index(mod);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--modality", e.what());
  }
  Image img = read_image(image);
  img.set_modality("");
  const auto t0 = Clock::now();
  const EquivarianceCurve curve =
      equivariance_curve([&](const Image& x) { return infer_comir(model, mod, x); }, img, step_degrees);
  manifest.add_timing("infer", "equivariance", seconds_since(t0));

  std::ostringstream csv;
  csv << "angle,correlation\n";
  for (std::size_t i = 0; i < curve.angles.size(); ++i) {
    csv << format_double(curve.angles[i]) << ',' << format_double(curve.correlations[i]) << '\n';
  }
  const json j = {{"modality", mod}, {"angles", curve.angles}, {"correlations", curve.correlations}};
  const fs::path csv_path = manifest.run_dir() / "equivariance.csv";
  const fs::path json_path = manifest.run_dir() / "equivariance.json";
  write_text(csv_path, csv.str());
  write_text(json_path, j.dump(2) + "\n");
  manifest.add_output(csv_path);
  manifest.add_output(json_path);
}

// ------------------------------------------------------------------ reproduce

void run_reproduce(const RunConfig& cfg, int jobs, Manifest& manifest) {
  const fs::path root = manifest.run_dir();
  auto stage = [&](const std::string& name) {
    const fs::path dir = root / name;
    fs::create_directory(dir);
    Manifest sub(name, dir);
    sub.set_config(cfg);
    return sub;
  };
  auto finish = [&](Manifest& sub) {
    sub.write();
    for (const TimingEntry& t : sub.timing()) manifest.add_timing(t.stage, t.item, t.seconds);
  };

  Manifest train_m = stage("train");
  const fs::path ckpt = run_train(cfg, train_m);
  finish(train_m);

  // Raw evaluation images go to data/<modality>/ so infer sees plain files.
  const Dataset ds = load_configured_dataset(cfg, manifest);
  const std::vector<MultimodalSample> samples = evaluation_samples(ds, cfg.eval);
  const std::vector<std::string> names = modality_names(ds);
  fs::create_directory(root / "data");
  fs::create_directory(root / "infer");
  for (std::size_t m = 0; m < names.size(); ++m) {
    const fs::path data_dir = root / "data" / names[m];
    fs::create_directory(data_dir);
    for (const MultimodalSample& s : samples) write_tiff(data_dir / (s.id + ".tif"), s.images[m]);
    const fs::path out_dir = root / "infer" / names[m];
    fs::create_directory(out_dir);
    Manifest infer_m(names[m], out_dir);
    run_infer(ckpt, data_dir, names[m], infer_m);
    finish(infer_m);
  }

  Manifest reg_m = stage("register");
  RegisterOptions opt;
  opt.checkpoint = ckpt;
  opt.jobs = jobs;
  run_register(cfg, opt, reg_m);
  finish(reg_m);

  Manifest eval_m = stage("evaluate");
  run_evaluate(root / "register", eval_m);
  finish(eval_m);

  fs::copy_file(root / "evaluate" / "summary.json", root / "summary.json");
  manifest.add_output(root / "summary.json");
  manifest.add_output(ckpt);
}

}  // namespace comir
