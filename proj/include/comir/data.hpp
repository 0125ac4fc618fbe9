#pragma once

#include "comir/image.hpp"
#include "comir/keyvalue.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

namespace comir {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a requested patch footprint leaves the source image.
class FootprintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// M pixel-aligned images of one scene, in modality order.
struct MultimodalSample {
  std::string id;
  std::vector<Image> images;

  int height() const { return images.empty() ? 0 : images.front().height(); }
  int width() const { return images.empty() ? 0 : images.front().width(); }
  void validate() const;
};

/// Patches cut at the same location and orientation from every modality.
struct PatchTuple {
  std::vector<Image> patches;
  std::string source_id;
  Point2D center;
  double orientation = 0.0;
};

struct AugmentationConfig {
  double flip_prob = 0.5;
  double rotation_range = std::numbers::pi;  // +- radians
  bool integer_degrees = false;
  std::vector<Interpolation> interpolation_choices{Interpolation::linear, Interpolation::nearest,
                                                   Interpolation::cubic};
  /// Probability of applying exactly one of {noise, blur, dropout, edge}.
  double photometric_prob = 0.2;
  double noise_sigma_max = 0.05;
  double blur_sigma = 0.1;
  double dropout_rate = 0.1;
  double dropout_superpixel_fraction = 0.05;
  double channel_gain_prob = 0.3;
  double gain_lo = 0.9;
  double gain_hi = 1.1;

  /// Geometric-only configuration with everything photometric disabled.
  static AugmentationConfig none();
  void validate() const;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> tuning;
  std::vector<std::string> test;

  /// Disjointness, and (when `all_ids` is non-empty) coverage of the declared ids.
  void validate(const std::vector<std::string>& all_ids) const;
};

enum class LayoutKind { paired, multichannel, synthetic };

struct ModalitySpec {
  std::string name;
  std::string pattern;        // paired: "dir/prefix*suffix"
  std::vector<int> channels;  // multichannel: channel indices taken from the shared file
  bool shg_log = false;
};

struct SyntheticSpec {
  int count = 2;
  int size = 512;
  std::uint64_t seed = 1;
  double noise_sigma = 0.05;
};

struct LayoutDescriptor {
  LayoutKind kind = LayoutKind::paired;
  std::vector<ModalitySpec> modalities;
  std::string pattern;  // multichannel: file glob relative to root
  SyntheticSpec synthetic;
  DatasetSplit split;

  static LayoutDescriptor parse(const KeyValueDoc& doc);
  static LayoutDescriptor parse_file(const std::filesystem::path& path);
  void write(KeyValueDoc& doc) const;
};

struct Dataset {
  LayoutDescriptor layout;
  std::vector<MultimodalSample> samples;

  std::vector<MultimodalSample> subset(const std::vector<std::string>& ids) const;
};

/// Loads every sample described by the layout, sorted by id.
Dataset load_dataset(const std::filesystem::path& root, const LayoutDescriptor& layout);

/// Synthetic two-modality fixture: modality 2 is the inverted, noised modality 1.
MultimodalSample synthetic_sample(const std::string& id, int size, std::uint64_t seed, double noise_sigma);

/// Pixelwise log(1 + x) for x in [0, 1].
Image preprocess_shg(const Image& img);

/// Rotated patch: patch(p) = img(R(angle) (p - patch_center) + center).
/// Throws FootprintError when any sample position leaves the image.
Image extract_patch(const Image& img, const Point2D& center, double angle, int height, int width,
                    Interpolation interp);

/// Random aligned patch tuples with augmentation; deterministic given the seed.
std::vector<PatchTuple> sample_batch(const std::vector<MultimodalSample>& samples, int n, int patch_size,
                                     const AugmentationConfig& aug, std::uint64_t seed);

/// Bounded retries for patch placement.
inline constexpr int kPlacementRetries = 100;

}  // namespace comir
