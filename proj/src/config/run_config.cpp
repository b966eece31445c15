#include "dsd/config/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace dsd::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& scope) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) {
      throw std::runtime_error("config: unknown key '" + (scope.empty() ? key : scope + "." + key) +
                               "'");
    }
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <typename T, size_t N>
void get_array_if(const json& obj, const char* key, std::array<T, N>& out,
                  const std::string& scope) {
  if (!obj.contains(key)) return;
  const json& a = obj.at(key);
  if (!a.is_array() || a.size() != N) {
    throw std::runtime_error("config: '" + scope + "." + key + "' must be an array of " +
                             std::to_string(N) + " values");
  }
  for (size_t i = 0; i < N; ++i) out[i] = a.at(i).get<T>();
}

void parse_ablation(const json& obj, train::AblationConfig& a) {
  reject_unknown(obj, {"blend", "shuffle", "cls_s", "con_s", "cls_c", "adversarial", "con_cls"},
                 "train.ablation");
  get_if(obj, "blend", a.blend);
  get_if(obj, "shuffle", a.shuffle);
  get_if(obj, "cls_s", a.cls_s);
  get_if(obj, "con_s", a.con_s);
  get_if(obj, "cls_c", a.cls_c);
  get_if(obj, "adversarial", a.adversarial);
  get_if(obj, "con_cls", a.con_cls);
}

void parse_train(const json& obj, train::TrainConfig& t) {
  reject_unknown(obj,
                 {"batch_size", "learning_rate", "weight_decay", "decoupled_weight_decay",
                  "patience_epochs", "max_epochs", "ablation"},
                 "train");
  get_if(obj, "batch_size", t.batch_size);
  get_if(obj, "learning_rate", t.adam.lr);
  get_if(obj, "weight_decay", t.adam.weight_decay);
  get_if(obj, "decoupled_weight_decay", t.adam.decoupled_decay);
  get_if(obj, "patience_epochs", t.patience_epochs);
  get_if(obj, "max_epochs", t.max_epochs);
  if (obj.contains("ablation")) parse_ablation(obj.at("ablation"), t.ablation);
}

void parse_loss(const json& obj, nn::LossConfig& l) {
  reject_unknown(obj,
                 {"margin", "beta0", "beta1", "beta2", "beta3", "focal_alpha", "focal_gamma",
                  "con_s_weight"},
                 "loss");
  get_if(obj, "margin", l.margin);
  get_if(obj, "beta0", l.beta0);
  get_if(obj, "beta1", l.beta1);
  get_if(obj, "beta2", l.beta2);
  get_if(obj, "beta3", l.beta3);
  get_if(obj, "focal_alpha", l.focal_alpha);
  get_if(obj, "focal_gamma", l.focal_gamma);
  get_if(obj, "con_s_weight", l.con_s_weight);
}

void parse_pipeline(const json& obj, audio::PipelineConfig& p) {
  reject_unknown(obj, {"target_rate", "target_samples", "win_length", "hop_length"}, "pipeline");
  get_if(obj, "target_rate", p.target_rate);
  get_if(obj, "target_samples", p.target_samples);
  get_if(obj, "win_length", p.spectrogram.win_length);
  get_if(obj, "hop_length", p.spectrogram.hop_length);
}

RunConfig from_json(const json& root) {
  if (!root.is_object()) throw std::runtime_error("config: top level must be a JSON object");
  reject_unknown(root,
                 {"manifest", "eval_manifest", "out_dir", "protocol", "seed", "split_ratios",
                  "train_synthesizers", "train_val_ratios", "stage_channels", "train", "loss",
                  "blend", "pipeline", "cache_dir"},
                 "");
  RunConfig cfg = default_run_config();
  get_if(root, "manifest", cfg.manifest);
  get_if(root, "eval_manifest", cfg.eval_manifest);
  get_if(root, "out_dir", cfg.out_dir);
  get_if(root, "protocol", cfg.protocol);
  get_if(root, "seed", cfg.seed);
  get_array_if(root, "split_ratios", cfg.split_ratios, "");
  get_if(root, "train_synthesizers", cfg.train_synthesizers);
  get_array_if(root, "train_val_ratios", cfg.train_val_ratios, "");
  get_array_if(root, "stage_channels", cfg.stage_channels, "");
  if (root.contains("train")) parse_train(root.at("train"), cfg.train);
  if (root.contains("loss")) parse_loss(root.at("loss"), cfg.loss);
  if (root.contains("blend")) {
    reject_unknown(root.at("blend"), {"noise_eta"}, "blend");
    get_if(root.at("blend"), "noise_eta", cfg.blend.noise_eta);
  }
  if (root.contains("pipeline")) parse_pipeline(root.at("pipeline"), cfg.pipeline);
  get_if(root, "cache_dir", cfg.cache_dir);
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json root;
  root["manifest"] = cfg.manifest;
  root["eval_manifest"] = cfg.eval_manifest;
  root["out_dir"] = cfg.out_dir;
  root["protocol"] = cfg.protocol;
  root["seed"] = cfg.seed;
  root["split_ratios"] = cfg.split_ratios;
  root["train_synthesizers"] = cfg.train_synthesizers;
  root["train_val_ratios"] = cfg.train_val_ratios;
  root["stage_channels"] = cfg.stage_channels;
  root["train"] = {
      {"batch_size", cfg.train.batch_size},
      {"learning_rate", cfg.train.adam.lr},
      {"weight_decay", cfg.train.adam.weight_decay},
      {"decoupled_weight_decay", cfg.train.adam.decoupled_decay},
      {"patience_epochs", cfg.train.patience_epochs},
      {"max_epochs", cfg.train.max_epochs},
      {"ablation",
       {
           {"blend", cfg.train.ablation.blend},
           {"shuffle", cfg.train.ablation.shuffle},
           {"cls_s", cfg.train.ablation.cls_s},
           {"con_s", cfg.train.ablation.con_s},
           {"cls_c", cfg.train.ablation.cls_c},
           {"adversarial", cfg.train.ablation.adversarial},
           {"con_cls", cfg.train.ablation.con_cls},
       }},
  };
  root["loss"] = {
      {"margin", cfg.loss.margin},
      {"beta0", cfg.loss.beta0},
      {"beta1", cfg.loss.beta1},
      {"beta2", cfg.loss.beta2},
      {"beta3", cfg.loss.beta3},
      {"focal_alpha", cfg.loss.focal_alpha},
      {"focal_gamma", cfg.loss.focal_gamma},
      {"con_s_weight", cfg.loss.con_s_weight},
  };
  root["blend"] = {{"noise_eta", cfg.blend.noise_eta}};
  root["pipeline"] = {
      {"target_rate", cfg.pipeline.target_rate},
      {"target_samples", cfg.pipeline.target_samples},
      {"win_length", cfg.pipeline.spectrogram.win_length},
      {"hop_length", cfg.pipeline.spectrogram.hop_length},
  };
  root["cache_dir"] = cfg.cache_dir;
  return root;
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
  json root;
  try {
    root = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(root);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("config: cannot open '" + path + "' for writing");
  os << to_json(cfg).dump(2) << '\n';
}

}  // namespace dsd::config
