#include "comir/checkpoint.hpp"

#include "comir/keyvalue.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace comir {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written little endian");

namespace {

constexpr char kMagic[8] = {'C', 'O', 'M', 'I', 'R', 'C', 'K', 'P'};

json encoder_json(const EncoderConfig& c) {
  return {{"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"first_conv_filters", c.first_conv_filters},
          {"levels", c.levels},
          {"block_depth", c.block_depth},
          {"growth_rate", c.growth_rate},
          {"bottleneck_layers", c.bottleneck_layers},
          {"compression", c.compression},
          {"dropout", c.dropout},
          {"pooling", c.pooling},
          {"upsampling", c.upsampling}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.in_channels = j.at("in_channels");
  c.out_channels = j.at("out_channels");
  c.first_conv_filters = j.at("first_conv_filters");
  c.levels = j.at("levels");
  c.block_depth = j.at("block_depth");
  c.growth_rate = j.at("growth_rate");
  c.bottleneck_layers = j.at("bottleneck_layers");
  c.compression = j.at("compression");
  c.dropout = j.at("dropout");
  c.pooling = j.at("pooling");
  c.upsampling = j.at("upsampling");
  return c;
}

json train_json(const TrainConfig& c) {
  return {{"optimizer", to_string(c.optimizer)},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"momentum", c.momentum},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"batch_size", c.batch_size},
          {"steps_per_epoch", c.steps_per_epoch},
          {"epochs", c.epochs},
          {"patch_size", c.patch_size},
          {"temperature", c.temperature},
          {"gradient_norm_clip", c.gradient_norm_clip},
          {"activation_decay_l1", c.activation_decay_l1},
          {"activation_decay_l2", c.activation_decay_l2},
          {"critic", to_string(c.critic)},
          {"group", to_string(c.group)},
          {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.optimizer = parse_optimizer(j.at("optimizer"));
  c.learning_rate = j.at("learning_rate");
  c.weight_decay = j.at("weight_decay");
  c.momentum = j.at("momentum");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.batch_size = j.at("batch_size");
  c.steps_per_epoch = j.at("steps_per_epoch");
  c.epochs = j.at("epochs");
  c.patch_size = j.at("patch_size");
  c.temperature = j.at("temperature");
  c.gradient_norm_clip = j.at("gradient_norm_clip");
  c.activation_decay_l1 = j.at("activation_decay_l1");
  c.activation_decay_l2 = j.at("activation_decay_l2");
  c.critic = parse_critic(j.at("critic"));
  c.group = parse_group(j.at("group"));
  c.seed = j.at("seed");
  return c;
}

struct BlobRef {
  std::string name;
  nn::Matrix* value;
};

std::vector<BlobRef> blobs(Encoder& enc) {
  std::vector<BlobRef> out;
  for (nn::Param* p : enc.parameters()) out.push_back({p->name, &p->value});
  for (const nn::Buffer& b : enc.buffers()) out.push_back({b.name, b.value});
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, ComirModel& model) {
  json header;
  header["format"] = "comir-checkpoint";
  header["modalities"] = model.modalities;
  header["train"] = train_json(model.train);
  header["seed"] = model.train.seed;
  json encoders = json::array();
  for (std::size_t m = 0; m < model.encoders.size(); ++m) {
    json e;
    e["config"] = encoder_json(model.encoder_configs[m]);
    e["layers"] = model.encoders[m].layer_list();
    json list = json::array();
    for (const BlobRef& b : blobs(model.encoders[m])) list.push_back({{"name", b.name}, {"rows", b.value->rows()}, {"cols", b.value->cols()}});
    e["blobs"] = list;
    e["parameter_hash"] = model.encoders[m].parameter_hash();
    encoders.push_back(e);
  }
  header["encoders"] = encoders;
  if (model.bilinear_weights.size() > 0) {
    json w = json::array();
    for (Eigen::Index r = 0; r < model.bilinear_weights.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < model.bilinear_weights.cols(); ++c) row.push_back(model.bilinear_weights(r, c));
      w.push_back(row);
    }
    header["bilinear_weights"] = w;
  }
  json hist = json::array();
  for (const StepRecord& s : model.history) hist.push_back({s.step, s.loss, s.grad_norm, s.clipped_norm});
  header["loss_history"] = hist;

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t size = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&size), sizeof(size));
  out.write(text.data(), std::streamsize(text.size()));
  for (Encoder& enc : model.encoders) {
    for (const BlobRef& b : blobs(enc)) {
      out.write(reinterpret_cast<const char*>(b.value->data()), std::streamsize(sizeof(float) * b.value->size()));
    }
  }
  if (!out) throw CheckpointError("short write to checkpoint '" + path.string() + "'");
}

ComirModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t size = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&size), sizeof(size));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("'" + path.string() + "' is not a checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(size, '\0');
  in.read(text.data(), std::streamsize(size));
  if (!in) throw CheckpointError("truncated checkpoint header");

  ComirModel model;
  try {
    const json header = json::parse(text);
    model.modalities = header.at("modalities").get<std::vector<std::string>>();
    model.train = train_from_json(header.at("train"));
    for (const json& e : header.at("encoders")) {
      model.encoder_configs.push_back(encoder_from_json(e.at("config")));
      model.encoders.emplace_back(model.encoder_configs.back(), 0);
      const auto refs = blobs(model.encoders.back());
      const json& list = e.at("blobs");
      if (list.size() != refs.size()) throw CheckpointError("blob count does not match the encoder layout");
      for (std::size_t i = 0; i < refs.size(); ++i) {
        if (list[i].at("name") != refs[i].name || list[i].at("rows") != refs[i].value->rows() ||
            list[i].at("cols") != refs[i].value->cols()) {
          throw CheckpointError("blob '" + list[i].at("name").get<std::string>() + "' does not match the layout");
        }
      }
    }
    if (header.contains("bilinear_weights")) {
      const json& w = header["bilinear_weights"];
      model.bilinear_weights.resize(Eigen::Index(w.size()), w.empty() ? 0 : Eigen::Index(w[0].size()));
      for (std::size_t r = 0; r < w.size(); ++r) {
        for (std::size_t c = 0; c < w[r].size(); ++c) model.bilinear_weights(Eigen::Index(r), Eigen::Index(c)) = w[r][c];
      }
    }
    for (const json& s : header.at("loss_history")) {
      model.history.push_back({s[0].get<long long>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>()});
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid configuration in checkpoint: ") + e.what());
  }
  for (Encoder& enc : model.encoders) {
    for (const BlobRef& b : blobs(enc)) {
      in.read(reinterpret_cast<char*>(b.value->data()), std::streamsize(sizeof(float) * b.value->size()));
    }
  }
  if (!in) throw CheckpointError("truncated checkpoint blobs");
  in.peek();
  if (!in.eof()) throw CheckpointError("trailing bytes after checkpoint blobs");
  return model;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write '" + path.string() + "'");
  out << "step,loss,grad_norm,clipped_norm\n";
  for (const StepRecord& s : history) {
    out << s.step << ',' << format_double(s.loss) << ',' << format_double(s.grad_norm) << ','
        << format_double(s.clipped_norm) << '\n';
  }
}

}  // namespace comir
