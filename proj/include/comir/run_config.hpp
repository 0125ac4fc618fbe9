#pragma once

// Run configuration: one key-value file drives every command.
//
//   [run]           output_dir, seed, jobs
//   [dataset]       descriptor, root
//   [encoder]       preset (desk|paper) + EncoderConfig fields
//   [train]         TrainConfig fields
//   [loss]          critic, temperature, group
//   [augmentation]  preset (default|none) + AugmentationConfig fields
//   [register]      methods, inputs (comir|raw), ref_modality, flt_modality
//   [mi] [intensity] [feature]   method parameters ([mi] has preset desk|paper)
//   [eval]          strata quotas, pair size, protocol, statistics
//
// Unknown keys are rejected; the resolved echo re-validates to itself.

#include "comir/encoder.hpp"
#include "comir/eval.hpp"
#include "comir/keyvalue.hpp"
#include "comir/registration/registration.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace comir {

enum class InputKind { comir, raw };

struct EvalSettings {
  StrataCounts quotas{4, 4, 4};
  int pair_size = 256;
  EvalProtocol protocol{};  // at protocol.side; scaled to pair_size when used
  std::vector<std::string> samples;  // empty: test split, else every sample
  int bootstrap_resamples = 10000;
  double confidence = 0.95;

  EvalProtocol scaled_protocol() const { return protocol.scaled_to(pair_size); }
};

struct RunConfig {
  std::filesystem::path source;  // the file it was read from, if any
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 1;
  bool seed_from_environment = false;
  int jobs = 1;

  std::filesystem::path dataset_descriptor;
  std::filesystem::path dataset_root;

  std::string encoder_preset = "desk";
  EncoderConfig encoder = EncoderConfig::desk();
  TrainConfig train{};
  std::string augmentation_preset = "default";
  AugmentationConfig augmentation{};

  std::vector<Method> methods{Method::feature, Method::intensity, Method::mi};
  InputKind inputs = InputKind::comir;
  std::string ref_modality;  // empty: first modality of the dataset
  std::string flt_modality;  // empty: the other modality
  bool intensity_multistart = true;
  std::string mi_preset = "desk";
  MethodConfigs registration{};

  EvalSettings eval{};

  /// Fully resolved key-value document (absolute paths, every default filled).
  KeyValueDoc echo() const;
};

/// Environment variable that overrides run.seed.
inline constexpr const char* kSeedEnvironmentVariable = "COMIR_SEED";

/// Parses a document; relative paths resolve against `base_dir`. Reads the
/// seed override from the environment. Throws ConfigError naming the key.
RunConfig parse_run_config(const KeyValueDoc& doc, const std::filesystem::path& base_dir);

/// Reads, resolves and checks a config file: unknown keys, invariant
/// violations and missing referenced paths all throw ConfigError.
RunConfig validate_config(const std::filesystem::path& path);

std::string to_string(InputKind k);
InputKind parse_input_kind(const std::string& name);

}  // namespace comir
