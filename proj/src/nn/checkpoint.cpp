#include "dsd/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dsd::nn {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

using nlohmann::json;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

void read_tensor(std::istream& is, Tensor& t) {
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!is) throw std::runtime_error("checkpoint: truncated tensor payload");
}

json shape_json(const Tensor& t) { return json(t.shape()); }

json header_json(DetectorModel& model, const std::vector<std::string>& synth_vocab,
                 const TrainProgress& progress, bool include_optimizer) {
  const ModelConfig& cfg = model.config();
  json h;
  h["config"] = {
      {"stage_channels",
       {cfg.stage_channels[0], cfg.stage_channels[1], cfg.stage_channels[2],
        cfg.stage_channels[3]}},
      {"n_synth_classes", cfg.n_synth_classes},
      {"n_compression", cfg.n_compression},
      {"n_speed", cfg.n_speed},
  };
  h["synth_vocab"] = synth_vocab;
  h["progress"] = {
      {"epoch", progress.epoch},
      {"adam_step", progress.adam_step},
      {"best_val_auc", progress.best_val_auc},
      {"epochs_without_gain", progress.epochs_without_gain},
  };
  json rng = json::object();
  for (const auto& [name, state] : progress.rng_states) rng[name] = state;
  h["rng_states"] = rng;

  json params = json::array();
  for (const Parameter* p : model.parameters()) {
    params.push_back({{"name", p->name}, {"shape", shape_json(p->value)}});
  }
  h["params"] = params;
  json buffers = json::array();
  for (const auto& [name, tensor] : model.buffers()) {
    buffers.push_back({{"name", name}, {"shape", shape_json(*tensor)}});
  }
  h["buffers"] = buffers;
  h["optimizer_state"] = include_optimizer;
  return h;
}

json read_header(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint: bad magic, not a checkpoint file");
  }
  const uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  }
  const uint64_t len = read_u64(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint: truncated header");
  return json::parse(text);
}

ModelConfig config_from(const json& h) {
  ModelConfig cfg;
  const json& c = h.at("config");
  const auto& ch = c.at("stage_channels");
  for (size_t i = 0; i < 4; ++i) cfg.stage_channels[i] = ch.at(i).get<int64_t>();
  cfg.n_synth_classes = c.at("n_synth_classes").get<int64_t>();
  cfg.n_compression = c.at("n_compression").get<int64_t>();
  cfg.n_speed = c.at("n_speed").get<int64_t>();
  return cfg;
}

void check_inventory(const json& listed, const char* kind, const std::string& name,
                     const Tensor& tensor, size_t index) {
  const json& item = listed.at(index);
  if (item.at("name").get<std::string>() != name) {
    throw std::runtime_error(std::string("checkpoint: ") + kind + " order mismatch at '" +
                             name + "'");
  }
  const std::vector<int64_t> shape = item.at("shape").get<std::vector<int64_t>>();
  if (shape != tensor.shape()) {
    throw std::runtime_error(std::string("checkpoint: ") + kind + " shape mismatch at '" +
                             name + "'");
  }
}

}  // namespace

void save_checkpoint(const std::string& path, DetectorModel& model,
                     const std::vector<std::string>& synth_vocab, const TrainProgress& progress,
                     bool include_optimizer) {
  if (include_optimizer) {
    for (const Parameter* p : model.parameters()) {
      if (p->adam_m.numel() != p->value.numel()) {
        throw std::runtime_error("checkpoint: optimizer state requested but '" + p->name +
                                 "' has no moment buffers");
      }
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");

  const std::string header = header_json(model, synth_vocab, progress, include_optimizer).dump();
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u64(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));

  for (const Parameter* p : model.parameters()) write_tensor(os, p->value);
  for (const auto& [name, tensor] : model.buffers()) write_tensor(os, *tensor);
  if (include_optimizer) {
    for (const Parameter* p : model.parameters()) {
      write_tensor(os, p->adam_m);
      write_tensor(os, p->adam_v);
    }
  }
  os.flush();
  if (!os) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

CheckpointDescription peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  const json h = read_header(is);
  CheckpointDescription d;
  d.config = config_from(h);
  d.synth_vocab = h.at("synth_vocab").get<std::vector<std::string>>();
  d.has_optimizer_state = h.at("optimizer_state").get<bool>();
  return d;
}

TrainProgress load_checkpoint(const std::string& path, DetectorModel& model,
                              bool load_optimizer) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  const json h = read_header(is);

  const ModelConfig stored = config_from(h);
  const ModelConfig& own = model.config();
  if (stored.stage_channels != own.stage_channels ||
      stored.n_synth_classes != own.n_synth_classes ||
      stored.n_compression != own.n_compression || stored.n_speed != own.n_speed) {
    throw std::runtime_error("checkpoint: model configuration does not match the file");
  }
  const bool has_opt = h.at("optimizer_state").get<bool>();
  if (load_optimizer && !has_opt) {
    throw std::runtime_error("checkpoint: no optimizer state stored in '" + path + "'");
  }

  const json& params = h.at("params");
  const json& buffers = h.at("buffers");
  if (params.size() != model.parameters().size() || buffers.size() != model.buffers().size()) {
    throw std::runtime_error("checkpoint: tensor inventory size mismatch");
  }
  for (size_t i = 0; i < model.parameters().size(); ++i) {
    Parameter* p = model.parameters()[i];
    check_inventory(params, "parameter", p->name, p->value, i);
    read_tensor(is, p->value);
  }
  for (size_t i = 0; i < model.buffers().size(); ++i) {
    auto& [name, tensor] = model.buffers()[i];
    check_inventory(buffers, "buffer", name, *tensor, i);
    read_tensor(is, *tensor);
  }
  if (has_opt) {
    for (Parameter* p : model.parameters()) {
      if (load_optimizer) {
        p->adam_m = Tensor::zeros(p->value.shape());
        p->adam_v = Tensor::zeros(p->value.shape());
        read_tensor(is, p->adam_m);
        read_tensor(is, p->adam_v);
      } else {
        is.seekg(static_cast<std::streamoff>(2 * p->value.numel() * sizeof(float)),
                 std::ios::cur);
      }
    }
  }

  TrainProgress progress;
  const json& pr = h.at("progress");
  progress.epoch = pr.at("epoch").get<int64_t>();
  progress.adam_step = pr.at("adam_step").get<int64_t>();
  progress.best_val_auc = pr.at("best_val_auc").get<double>();
  progress.epochs_without_gain = pr.at("epochs_without_gain").get<int64_t>();
  for (const auto& [name, state] : h.at("rng_states").items()) {
    progress.rng_states[name] = state.get<uint64_t>();
  }
  return progress;
}

}  // namespace dsd::nn
