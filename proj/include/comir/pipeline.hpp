#pragma once

// Pipeline stages behind the command-line tool. Every stage writes into its
// own run directory (created fresh, never reused) together with
// manifest.json and timing.csv.

#include "comir/checkpoint.hpp"
#include "comir/eval.hpp"
#include "comir/run_config.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace comir {

inline constexpr const char* kToolVersion = "0.1.0";

/// Raised for failures inside a stage (as opposed to configuration errors).
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a over a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Creates `out` (must not exist or be empty) or `parent/<command>-<stamp>`.
std::filesystem::path create_run_dir(const std::filesystem::path& parent, const std::string& command,
                                     const std::optional<std::filesystem::path>& out);

/// Collects what a run read and wrote; write() hashes every listed file.
class Manifest {
 public:
  Manifest(std::string command, std::filesystem::path run_dir);

  void set_config(const RunConfig& cfg);
  void add_seed(const std::string& name, std::uint64_t value);
  void add_input(const std::filesystem::path& p);
  void add_output(const std::filesystem::path& p);
  void add_timing(const std::string& stage, const std::string& item, double seconds);
  void set(const std::string& key, nlohmann::json value);

  const std::vector<TimingEntry>& timing() const { return timing_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

  /// Writes manifest.json and timing.csv into the run directory.
  void write();

 private:
  std::string command_;
  std::filesystem::path run_dir_;
  nlohmann::json extra_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::vector<TimingEntry> timing_;
};

/// Samples used for training: the train split, or every sample when empty.
std::vector<MultimodalSample> training_samples(const Dataset& ds);
/// Samples used for evaluation: eval.samples, else the test split, else all.
std::vector<MultimodalSample> evaluation_samples(const Dataset& ds, const EvalSettings& eval);

/// Trains on the configured dataset; writes checkpoint.ckpt and loss.csv.
/// Returns the checkpoint path.
std::filesystem::path run_train(const RunConfig& cfg, Manifest& manifest);

/// CoMIRs (float TIFF) and logistic visualisations (PNG) for every image in
/// `input_dir`, through the encoder of `modality` (default: the first).
void run_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& input_dir,
               const std::optional<std::string>& modality, Manifest& manifest);

struct RegisterOptions {
  std::vector<Method> methods;     // empty: cfg.methods
  std::string ref_modality;        // empty: cfg / first dataset modality
  std::optional<std::filesystem::path> checkpoint;
  int jobs = 1;
};

/// Builds the evaluation pairs and registers each with every method. Writes
/// pairs.json (protocol) and registrations.jsonl (one record per pair and
/// method). Throws ConfigError when CoMIR inputs lack a checkpoint.
void run_register(const RunConfig& cfg, const RegisterOptions& opt, Manifest& manifest);

/// Statistics over a register output directory: summary.json (deterministic,
/// no run times), per_pair.csv and ecdf_<method>.csv.
void run_evaluate(const std::filesystem::path& results_dir, Manifest& manifest);

/// Stabilised-correlation curve of one image: equivariance.csv / .json.
void run_equivariance(const std::filesystem::path& checkpoint, const std::filesystem::path& image,
                      double step_degrees, const std::optional<std::string>& modality, Manifest& manifest);

/// train -> infer -> register -> evaluate in sub-directories of the run
/// directory; the evaluate summary is also copied to <run>/summary.json.
void run_reproduce(const RunConfig& cfg, int jobs, Manifest& manifest);

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStage = 3;

}  // namespace comir
