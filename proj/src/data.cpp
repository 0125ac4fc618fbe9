#include "comir/data.hpp"

#include "comir/filters.hpp"
#include "comir/image_io.hpp"
#include "comir/synthetic.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <random>
#include <set>

namespace comir {

void MultimodalSample::validate() const {
  if (images.size() < 2) throw DatasetError("sample '" + id + "' needs at least two modalities");
  for (const Image& img : images) {
    if (img.height() != images.front().height() || img.width() != images.front().width()) {
      throw DatasetError("sample '" + id + "': modality '" + img.modality() + "' is " +
                         std::to_string(img.height()) + "x" + std::to_string(img.width()) + " but '" +
                         images.front().modality() + "' is " + std::to_string(images.front().height()) + "x" +
                         std::to_string(images.front().width()));
    }
  }
}

AugmentationConfig AugmentationConfig::none() {
  AugmentationConfig a;
  a.flip_prob = 0.0;
  a.rotation_range = 0.0;
  a.interpolation_choices = {Interpolation::linear};
  a.photometric_prob = 0.0;
  a.channel_gain_prob = 0.0;
  return a;
}

void AugmentationConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("augmentation.") + name, "probability must be in [0, 1]");
  };
  prob(flip_prob, "flip_prob");
  prob(photometric_prob, "photometric_prob");
  prob(channel_gain_prob, "channel_gain_prob");
  prob(dropout_rate, "dropout_rate");
  if (rotation_range < 0.0) throw ConfigError("augmentation.rotation_range", "must be non-negative");
  if (interpolation_choices.empty()) throw ConfigError("augmentation.interpolation", "at least one choice needed");
  if (noise_sigma_max < 0.0) throw ConfigError("augmentation.noise_sigma_max", "must be non-negative");
  if (blur_sigma < 0.0) throw ConfigError("augmentation.blur_sigma", "must be non-negative");
  if (!(dropout_superpixel_fraction > 0.0 && dropout_superpixel_fraction <= 1.0)) {
    throw ConfigError("augmentation.dropout_superpixel_fraction", "must be in (0, 1]");
  }
  if (!(gain_lo < gain_hi)) throw ConfigError("augmentation.gain_range", "range is degenerate");
}

void DatasetSplit::validate(const std::vector<std::string>& all_ids) const {
  std::set<std::string> seen;
  for (const auto* part : {&train, &validation, &tuning, &test}) {
    for (const std::string& id : *part) {
      if (!seen.insert(id).second) throw ConfigError("split", "sample '" + id + "' appears in more than one split");
    }
  }
  if (!all_ids.empty() && !seen.empty()) {
    const std::set<std::string> declared(all_ids.begin(), all_ids.end());
    for (const std::string& id : seen) {
      if (!declared.contains(id)) throw ConfigError("split", "sample '" + id + "' is not in the dataset");
    }
    for (const std::string& id : declared) {
      if (!seen.contains(id)) throw ConfigError("split", "sample '" + id + "' is not assigned to any split");
    }
  }
}

LayoutDescriptor LayoutDescriptor::parse(const KeyValueDoc& doc) {
  LayoutDescriptor out;
  const std::string kind = doc.get_string("layout.kind", "paired");
  if (kind == "paired") {
    out.kind = LayoutKind::paired;
  } else if (kind == "multichannel") {
    out.kind = LayoutKind::multichannel;
  } else if (kind == "synthetic") {
    out.kind = LayoutKind::synthetic;
  } else {
    throw ConfigError("layout.kind", "expected paired, multichannel or synthetic, got '" + kind + "'");
  }
  out.pattern = doc.get_string("layout.pattern", "");
  const auto names = doc.get_list("layout.modalities", out.kind == LayoutKind::synthetic
                                                           ? std::vector<std::string>{"A", "B"}
                                                           : std::vector<std::string>{});
  if (names.size() < 2) throw ConfigError("layout.modalities", "at least two modalities are required");
  for (const std::string& name : names) {
    ModalitySpec m;
    m.name = name;
    m.pattern = doc.get_string(name + ".pattern", "");
    for (double c : doc.get_double_list(name + ".channels", {})) m.channels.push_back(int(c));
    m.shg_log = doc.get_bool(name + ".shg_log", false);
    if (out.kind == LayoutKind::paired && m.pattern.empty()) throw ConfigError(name + ".pattern", "required for paired layouts");
    if (out.kind == LayoutKind::multichannel && m.channels.empty()) {
      throw ConfigError(name + ".channels", "required for multichannel layouts");
    }
    out.modalities.push_back(m);
  }
  if (out.kind == LayoutKind::multichannel && out.pattern.empty()) {
    throw ConfigError("layout.pattern", "required for multichannel layouts");
  }
  out.synthetic.count = int(doc.get_int("synthetic.count", out.synthetic.count));
  out.synthetic.size = int(doc.get_int("synthetic.size", out.synthetic.size));
  out.synthetic.seed = std::uint64_t(doc.get_int("synthetic.seed", (long long)out.synthetic.seed));
  out.synthetic.noise_sigma = doc.get_double("synthetic.noise_sigma", out.synthetic.noise_sigma);
  if (out.synthetic.count < 1) throw ConfigError("synthetic.count", "must be at least 1");
  if (out.synthetic.size < 16) throw ConfigError("synthetic.size", "must be at least 16");
  out.split.train = doc.get_list("split.train", {});
  out.split.validation = doc.get_list("split.validation", {});
  out.split.tuning = doc.get_list("split.tuning", {});
  out.split.test = doc.get_list("split.test", {});
  out.split.validate({});
  return out;
}

LayoutDescriptor LayoutDescriptor::parse_file(const std::filesystem::path& path) {
  KeyValueDoc doc = KeyValueDoc::parse_file(path);
  LayoutDescriptor out = parse(doc);
  doc.reject_unknown();
  return out;
}

void LayoutDescriptor::write(KeyValueDoc& doc) const {
  const char* kinds[] = {"paired", "multichannel", "synthetic"};
  doc.set("layout.kind", std::string(kinds[int(kind)]));
  std::vector<std::string> names;
  for (const auto& m : modalities) names.push_back(m.name);
  doc.set("layout.modalities", names);
  if (!pattern.empty()) doc.set("layout.pattern", pattern);
  for (const auto& m : modalities) {
    if (!m.pattern.empty()) doc.set(m.name + ".pattern", m.pattern);
    if (!m.channels.empty()) {
      std::vector<double> ch(m.channels.begin(), m.channels.end());
      doc.set(m.name + ".channels", ch);
    }
    doc.set(m.name + ".shg_log", m.shg_log);
  }
  if (kind == LayoutKind::synthetic) {
    doc.set("synthetic.count", synthetic.count);
    doc.set("synthetic.size", synthetic.size);
    doc.set("synthetic.seed", (long long)synthetic.seed);
    doc.set("synthetic.noise_sigma", synthetic.noise_sigma);
  }
  doc.set("split.train", split.train);
  doc.set("split.validation", split.validation);
  doc.set("split.tuning", split.tuning);
  doc.set("split.test", split.test);
}

std::vector<MultimodalSample> Dataset::subset(const std::vector<std::string>& ids) const {
  std::vector<MultimodalSample> out;
  for (const std::string& id : ids) {
    auto it = std::find_if(samples.begin(), samples.end(), [&](const MultimodalSample& s) { return s.id == id; });
    if (it == samples.end()) throw DatasetError("sample '" + id + "' is not in the dataset");
    out.push_back(*it);
  }
  return out;
}

namespace {

struct GlobParts {
  std::filesystem::path directory;
  std::string name_glob;
  std::string prefix;
  std::string suffix;
};

GlobParts split_glob(const std::filesystem::path& root, const std::string& pattern) {
  const std::filesystem::path p(pattern);
  GlobParts g;
  g.directory = root / p.parent_path();
  g.name_glob = p.filename().string();
  const auto first = g.name_glob.find('*');
  const auto last = g.name_glob.rfind('*');
  if (first == std::string::npos) throw ConfigError("pattern", "'" + pattern + "' must contain a '*' wildcard");
  g.prefix = g.name_glob.substr(0, first);
  g.suffix = g.name_glob.substr(last + 1);
  return g;
}

std::map<std::string, std::filesystem::path> match_files(const GlobParts& g) {
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(g.directory)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(g.directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(g.name_glob.c_str(), name.c_str(), 0) != 0) continue;
    out[name.substr(g.prefix.size(), name.size() - g.prefix.size() - g.suffix.size())] = entry.path();
  }
  return out;
}

Image finish_modality(Image img, const ModalitySpec& m) {
  img.set_modality(m.name);
  if (m.shg_log) img = preprocess_shg(img);
  return img;
}

}  // namespace

MultimodalSample synthetic_sample(const std::string& id, int size, std::uint64_t seed, double noise_sigma) {
  MultimodalSample s;
  s.id = id;
  Image a = synthetic_texture(size, size, seed);
  a.set_modality("A");
  Image b = synthetic_inverted(a, noise_sigma, seed ^ 0x9e3779b97f4a7c15ULL);
  b.set_modality("B");
  s.images = {std::move(a), std::move(b)};
  return s;
}

Dataset load_dataset(const std::filesystem::path& root, const LayoutDescriptor& layout) {
  Dataset ds;
  ds.layout = layout;
  switch (layout.kind) {
    case LayoutKind::synthetic: {
      for (int i = 0; i < layout.synthetic.count; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "synth%03d", i);
        MultimodalSample s = synthetic_sample(id, layout.synthetic.size, layout.synthetic.seed + std::uint64_t(i) * 7919u,
                                              layout.synthetic.noise_sigma);
        for (std::size_t m = 0; m < s.images.size() && m < layout.modalities.size(); ++m) {
          s.images[m] = finish_modality(std::move(s.images[m]), layout.modalities[m]);
        }
        ds.samples.push_back(std::move(s));
      }
      break;
    }
    case LayoutKind::paired: {
      std::vector<std::map<std::string, std::filesystem::path>> files;
      std::set<std::string> ids;
      for (const auto& m : layout.modalities) {
        files.push_back(match_files(split_glob(root, m.pattern)));
        for (const auto& [id, path] : files.back()) ids.insert(id);
      }
      for (const std::string& id : ids) {
        MultimodalSample s;
        s.id = id;
        for (std::size_t m = 0; m < layout.modalities.size(); ++m) {
          auto it = files[m].find(id);
          if (it == files[m].end()) {
            throw DatasetError("sample '" + id + "' has no file for modality '" + layout.modalities[m].name + "'");
          }
          s.images.push_back(finish_modality(read_image(it->second), layout.modalities[m]));
        }
        s.validate();
        ds.samples.push_back(std::move(s));
      }
      break;
    }
    case LayoutKind::multichannel: {
      for (const auto& [id, path] : match_files(split_glob(root, layout.pattern))) {
        const Image full = read_image(path);
        MultimodalSample s;
        s.id = id;
        for (const auto& m : layout.modalities) {
          try {
            s.images.push_back(finish_modality(full.select_channels(m.channels), m));
          } catch (const ImageError& e) {
            throw DatasetError("sample '" + id + "', modality '" + m.name + "': " + e.what());
          }
        }
        s.validate();
        ds.samples.push_back(std::move(s));
      }
      break;
    }
  }
  if (ds.samples.empty()) std::clog << "warning: dataset at '" << root.string() << "' contains no samples\n";
  std::sort(ds.samples.begin(), ds.samples.end(),
            [](const MultimodalSample& a, const MultimodalSample& b) { return a.id < b.id; });
  std::vector<std::string> all;
  for (const auto& s : ds.samples) all.push_back(s.id);
  const auto& sp = layout.split;
  if (!(sp.train.empty() && sp.validation.empty() && sp.tuning.empty() && sp.test.empty())) sp.validate(all);
  return ds;
}

Image preprocess_shg(const Image& img) {
  const float lo = img.pixels().minCoeff();
  const float hi = img.pixels().maxCoeff();
  if (lo < 0.0f || hi > 1.0f) {
    throw ImageError("log preprocessing expects values in [0, 1], found [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  }
  Image out = img;
  out.pixels() = img.pixels().array().log1p().matrix();
  out.set_value_range({0.0f, float(std::log(2.0))});
  return out;
}

Image extract_patch(const Image& img, const Point2D& center, double angle, int height, int width,
                    Interpolation interp) {
  const Point2D pc((width - 1) / 2.0, (height - 1) / 2.0);
  const RigidTransform2D t{angle, center - pc, pc};
  const double eps = 1e-6;
  for (const Point2D& corner : {Point2D(0, 0), Point2D(width - 1, 0), Point2D(0, height - 1),
                               Point2D(width - 1, height - 1)}) {
    const Point2D q = apply_rigid(t, corner);
    if (q.x() < -eps || q.y() < -eps || q.x() > img.width() - 1 + eps || q.y() > img.height() - 1 + eps) {
      throw FootprintError("patch footprint at (" + std::to_string(center.x()) + ", " + std::to_string(center.y()) +
                           ") exceeds the source image");
    }
  }
  return warp(img, t, interp, height, width).image;
}

namespace {

Image flip(const Image& img, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return img;
  Image out = img;
  for (int c = 0; c < img.channels(); ++c) {
    if (horizontal) out.plane(c) = out.plane(c).rowwise().reverse().eval();
    if (vertical) out.plane(c) = out.plane(c).colwise().reverse().eval();
  }
  return out;
}

Image photometric(Image img, const AugmentationConfig& aug, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < aug.photometric_prob) {
    const int choice = std::uniform_int_distribution<int>(0, 3)(rng);
    switch (choice) {
      case 0: {
        const double sigma = unit(rng) * aug.noise_sigma_max;
        std::normal_distribution<float> gauss(0.0f, float(sigma));
        for (Eigen::Index i = 0; i < img.pixels().size(); ++i) img.pixels().data()[i] += gauss(rng);
        break;
      }
      case 1:
        img = gaussian_blur(img, aug.blur_sigma);
        break;
      case 2: {
        const int cell = std::max(1, int(std::lround(aug.dropout_superpixel_fraction * img.width())));
        for (int c = 0; c < img.channels(); ++c) {
          for (int y0 = 0; y0 < img.height(); y0 += cell) {
            for (int x0 = 0; x0 < img.width(); x0 += cell) {
              if (unit(rng) >= aug.dropout_rate) continue;
              img.plane(c)
                  .block(y0, x0, std::min(cell, img.height() - y0), std::min(cell, img.width() - x0))
                  .setZero();
            }
          }
        }
        break;
      }
      default:
        img = gradient_magnitude(img);
        break;
    }
  }
  for (int c = 0; c < img.channels(); ++c) {
    if (unit(rng) < aug.channel_gain_prob) {
      const double gain = aug.gain_lo + unit(rng) * (aug.gain_hi - aug.gain_lo);
      img.pixels().row(c) *= float(gain);
    }
  }
  return img;
}

}  // namespace

std::vector<PatchTuple> sample_batch(const std::vector<MultimodalSample>& samples, int n, int patch_size,
                                     const AugmentationConfig& aug, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("a batch needs at least two tuples to provide negatives");
  aug.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].validate();
    if (samples[i].height() >= patch_size && samples[i].width() >= patch_size) usable.push_back(i);
  }
  if (usable.empty()) throw DatasetError("no sample is large enough for " + std::to_string(patch_size) + "px patches");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PatchTuple> batch;
  batch.reserve(std::size_t(n));
  const double pc = (patch_size - 1) / 2.0;
  for (int k = 0; k < n; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const MultimodalSample& src = samples[usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)]];
      double angle = (2.0 * unit(rng) - 1.0) * aug.rotation_range;
      if (aug.integer_degrees) angle = std::round(angle * 180.0 / std::numbers::pi) * std::numbers::pi / 180.0;
      // Centers sit on the pixel lattice shifted by the patch center, so an
      // unrotated patch samples integer positions exactly.
      const int x0 = std::uniform_int_distribution<int>(0, src.width() - patch_size)(rng);
      const int y0 = std::uniform_int_distribution<int>(0, src.height() - patch_size)(rng);
      const Point2D center(x0 + pc, y0 + pc);
      const Interpolation interp = aug.interpolation_choices[std::uniform_int_distribution<std::size_t>(
          0, aug.interpolation_choices.size() - 1)(rng)];
      const bool flip_h = unit(rng) < aug.flip_prob;
      const bool flip_v = unit(rng) < aug.flip_prob;
      PatchTuple tuple;
      tuple.source_id = src.id;
      tuple.center = center;
      tuple.orientation = angle;
      try {
        for (const Image& img : src.images) {
          tuple.patches.push_back(flip(extract_patch(img, center, angle, patch_size, patch_size, interp), flip_h, flip_v));
        }
      } catch (const FootprintError&) {
        continue;
      }
      for (Image& p : tuple.patches) p = photometric(std::move(p), aug, rng);
      batch.push_back(std::move(tuple));
      placed = true;
    }
    if (!placed) {
      throw DatasetError("no valid patch placement after " + std::to_string(kPlacementRetries) + " attempts");
    }
  }
  return batch;
}

}  // namespace comir
