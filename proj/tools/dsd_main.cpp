#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dsd/config/run_config.hpp"
#include "dsd/data/splits.hpp"
#include "dsd/data/synthetic.hpp"
#include "dsd/eval/protocol.hpp"
#include "dsd/nn/checkpoint.hpp"
#include "dsd/train/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dsd;

/// Flag/config mistakes exit with 1; anything failing later exits with 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string protocol;
  uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> ablate;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_ablate) {
  cmd->add_option("--config", f.config_path, "Run configuration JSON")->required();
  cmd->add_option("--out-dir", f.out_dir, "Override the configured output directory");
  cmd->add_option("--protocol", f.protocol,
                  "Override the protocol (inner, cross_method, cross_dataset, cross_language)");
  cmd->add_option("--seed", f.seed, "Override the configured seed")
      ->each([&f](const std::string&) { f.seed_set = true; });
  if (with_ablate) {
    cmd->add_option("--ablate", f.ablate,
                    "Disable one switch (repeatable): no-blend, no-shuffle, no-cls-s, "
                    "no-con-s, no-cls-c, no-adversarial, no-con-cls");
  }
}

void apply_ablation(const std::string& name, train::AblationConfig& a) {
  if (name == "no-blend") a.blend = false;
  else if (name == "no-shuffle") a.shuffle = false;
  else if (name == "no-cls-s") a.cls_s = false;
  else if (name == "no-con-s") a.con_s = false;
  else if (name == "no-cls-c") a.cls_c = false;
  else if (name == "no-adversarial") a.adversarial = false;
  else if (name == "no-con-cls") a.con_cls = false;
  else throw UsageError("unknown ablation switch '" + name + "'");
}

config::RunConfig resolve_config(const CommonFlags& f) {
  config::RunConfig cfg;
  try {
    cfg = config::load_run_config(f.config_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (!f.protocol.empty()) cfg.protocol = f.protocol;
  if (f.seed_set) cfg.seed = f.seed;
  for (const std::string& name : f.ablate) apply_ablation(name, cfg.train.ablation);
  cfg.train.seed = cfg.seed;
  return cfg;
}

eval::Protocol protocol_of(const config::RunConfig& cfg) {
  try {
    return eval::parse_protocol(cfg.protocol);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

data::SplitSet make_train_splits(const config::RunConfig& cfg, eval::Protocol protocol,
                                 const std::vector<data::ManifestEntry>& entries) {
  switch (protocol) {
    case eval::Protocol::kInner:
      return data::split_inner(entries, cfg.split_ratios, cfg.seed);
    case eval::Protocol::kCrossMethod: {
      if (cfg.train_synthesizers.empty()) {
        throw UsageError("cross_method training needs train_synthesizers in the config");
      }
      const std::set<std::string> synths(cfg.train_synthesizers.begin(),
                                         cfg.train_synthesizers.end());
      return data::split_cross_method(entries, synths, cfg.split_ratios, cfg.train_val_ratios,
                                      cfg.seed);
    }
    case eval::Protocol::kCrossDataset:
    case eval::Protocol::kCrossLanguage:
      // The test side lives in eval_manifest, so the training manifest splits
      // into train/validation only.
      return data::split_inner(entries, {cfg.train_val_ratios[0], cfg.train_val_ratios[1], 0.0},
                               cfg.seed);
  }
  throw UsageError("unhandled protocol");
}

nn::ModelConfig model_config_for(const config::RunConfig& cfg, int64_t vocab_size) {
  nn::ModelConfig mc;
  mc.stage_channels = cfg.stage_channels;
  mc.n_synth_classes = vocab_size;
  mc.validate();
  return mc;
}

eval::FeatureFn feature_fn_for(const config::RunConfig& cfg) {
  const audio::PipelineConfig pipe = cfg.pipeline;
  if (cfg.cache_dir.empty()) return eval::disk_feature_fn(pipe);
  const std::string dir = cfg.cache_dir;
  return [pipe, dir](const data::ManifestEntry& e) {
    const fs::path cached = fs::path(dir) / (e.file_id + "_" + e.synthesizer_id + ".spec");
    if (fs::exists(cached)) return audio::load_spectrogram(cached.string());
    return audio::featurize(audio::load_waveform(e.path, pipe.target_rate), pipe,
                            audio::CropMode::kMiddle);
  };
}

std::vector<data::ManifestEntry> eval_test_entries(const config::RunConfig& cfg,
                                                   eval::Protocol protocol,
                                                   data::SplitSet* splits_out) {
  const std::vector<data::ManifestEntry> entries = data::load_manifest(cfg.manifest);
  switch (protocol) {
    case eval::Protocol::kInner:
    case eval::Protocol::kCrossMethod: {
      data::SplitSet s = make_train_splits(cfg, protocol, entries);
      if (splits_out) *splits_out = s;
      return s.test;
    }
    case eval::Protocol::kCrossDataset:
    case eval::Protocol::kCrossLanguage: {
      if (cfg.eval_manifest.empty()) {
        throw UsageError(std::string(eval::protocol_name(protocol)) +
                         " evaluation needs eval_manifest in the config");
      }
      return data::load_manifest(cfg.eval_manifest);
    }
  }
  throw UsageError("unhandled protocol");
}

int cmd_synth_corpus(const std::string& out_dir, int clips, uint64_t seed) {
  data::SyntheticCorpusConfig cfg;
  cfg.out_dir = out_dir;
  cfg.num_file_ids = clips;
  cfg.seed = seed;
  const auto entries = data::generate_synthetic_corpus(cfg);
  std::cout << "wrote " << entries.size() << " clips and manifest.tsv under " << out_dir << "\n";
  return 0;
}

int cmd_preprocess_cache(const CommonFlags& flags) {
  config::RunConfig cfg = resolve_config(flags);
  if (cfg.cache_dir.empty()) throw UsageError("preprocess-cache needs cache_dir in the config");
  const auto entries = data::load_manifest(cfg.manifest);
  fs::create_directories(cfg.cache_dir);
  int64_t written = 0;
  for (const data::ManifestEntry& e : entries) {
    const audio::Spectrogram spec = audio::featurize(
        audio::load_waveform(e.path, cfg.pipeline.target_rate), cfg.pipeline,
        audio::CropMode::kMiddle);
    const fs::path out = fs::path(cfg.cache_dir) / (e.file_id + "_" + e.synthesizer_id + ".spec");
    audio::save_spectrogram(out.string(), spec);
    ++written;
  }
  std::cout << "cached " << written << " spectrograms under " << cfg.cache_dir << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  config::RunConfig cfg = resolve_config(flags);
  const eval::Protocol protocol = protocol_of(cfg);
  if (cfg.manifest.empty()) throw UsageError("train needs manifest in the config");

  fs::create_directories(cfg.out_dir);
  config::save_run_config(cfg.out_dir + "/config.json", cfg);

  const auto entries = data::load_manifest(cfg.manifest);
  data::SplitSet splits = make_train_splits(cfg, protocol, entries);
  const auto policy = protocol == eval::Protocol::kCrossMethod ? data::IdDisjointness::kPerClass
                                                               : data::IdDisjointness::kGlobal;
  data::validate_split(splits, policy);
  data::save_split(cfg.out_dir + "/split.tsv", splits);

  auto codec = data::make_process_codec_backend();
  if (!codec->available()) {
    std::cerr << "note: no codec transcoder (set DSD_CODEC_BIN); compression pseudo-labels "
                 "restricted to the identity setting\n";
  }

  nn::DetectorModel model(
      model_config_for(cfg, static_cast<int64_t>(splits.synthesizer_vocab.size())),
      Rng(cfg.seed).derive("init").state());
  train::Trainer trainer(model, splits, cfg.train, cfg.loss, cfg.blend, cfg.pipeline,
                         codec.get());

  std::ofstream log(cfg.out_dir + "/train.log", std::ios::trunc);
  if (!log) throw std::runtime_error("cannot open training log in " + cfg.out_dir);
  const train::FitResult fit = trainer.fit(cfg.out_dir, &log);

  std::ofstream summary(cfg.out_dir + "/fit.json", std::ios::trunc);
  summary << "{\n"
          << "  \"epochs_run\": " << fit.epochs_run << ",\n"
          << "  \"best_epoch\": " << fit.best_epoch << ",\n"
          << "  \"best_val_auc\": " << fit.best_val_auc << ",\n"
          << "  \"best_val_eer\": " << fit.best_val_eer << ",\n"
          << "  \"early_stopped\": " << (fit.early_stopped ? "true" : "false") << ",\n"
          << "  \"checkpoint\": \"" << fit.best_checkpoint_path << "\"\n"
          << "}\n";

  std::cout << "best epoch " << fit.best_epoch << ": val AUC "
            << train::format_epoch_record(fit.best_epoch, fit.best_val_auc, fit.best_val_eer)
            << "\n"
            << "checkpoint: " << fit.best_checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path) {
  config::RunConfig cfg = resolve_config(flags);
  const eval::Protocol protocol = protocol_of(cfg);

  const std::string ckpt =
      checkpoint_path.empty() ? cfg.out_dir + "/best.ckpt" : checkpoint_path;
  const nn::CheckpointDescription desc = nn::peek_checkpoint(ckpt);
  nn::DetectorModel model(desc.config, 0);
  nn::load_checkpoint(ckpt, model, false);

  const std::vector<data::ManifestEntry> test = eval_test_entries(cfg, protocol, nullptr);
  const auto clips =
      eval::score_test_set(model, protocol, test, feature_fn_for(cfg), cfg.train.batch_size);
  const eval::ProtocolReport report = eval::build_report(protocol, clips);

  fs::create_directories(cfg.out_dir);
  const std::string base = cfg.out_dir + "/" + eval::protocol_name(protocol);
  eval::save_score_dump(base + "_scores.tsv", clips);
  eval::save_report(base + "_report.json", report);
  const std::string table = eval::format_report_table(report);
  std::ofstream table_file(base + "_report.txt", std::ios::trunc);
  table_file << table;
  std::cout << table;
  return 0;
}

int cmd_report(const std::vector<std::string>& dumps) {
  if (dumps.empty()) throw UsageError("report needs at least one score dump");
  bool first = true;
  for (const std::string& path : dumps) {
    const auto clips = eval::load_score_dump(path);
    // Tags in the dump already encode the grouping; synthesizer-style dumps
    // carry a "real" tag, language dumps do not.
    bool has_real_tag = false;
    for (const auto& c : clips) has_real_tag = has_real_tag || c.group == "real";
    bool single_group = true;
    for (const auto& c : clips) single_group = single_group && c.group == clips.front().group;
    const eval::Protocol p = single_group ? eval::Protocol::kInner
                             : has_real_tag ? eval::Protocol::kCrossDataset
                                            : eval::Protocol::kCrossLanguage;
    eval::ProtocolReport report = eval::build_report(p, clips);
    report.protocol = path;
    if (!first) std::cout << "\n";
    std::cout << eval::format_report_table(report);
    first = false;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-stream deepfake speech detector"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, cache_flags;
  std::string checkpoint_path;
  std::string corpus_dir = "corpus";
  int corpus_clips = 134;
  uint64_t corpus_seed = 1234;
  std::vector<std::string> report_dumps;

  CLI::App* synth = app.add_subcommand("synth-corpus", "Generate the built-in audio corpus");
  synth->add_option("--out-dir", corpus_dir, "Corpus directory")->required();
  synth->add_option("--clips", corpus_clips, "Number of genuine clips");
  synth->add_option("--seed", corpus_seed, "Corpus seed");

  CLI::App* cache = app.add_subcommand("preprocess-cache",
                                       "Precompute evaluation spectrograms into cache_dir");
  add_common(cache, cache_flags, false);

  CLI::App* train = app.add_subcommand("train", "Train a detector");
  add_common(train, train_flags, true);

  CLI::App* evalc = app.add_subcommand("eval", "Score a test set and report AUC/EER");
  add_common(evalc, eval_flags, false);
  evalc->add_option("--checkpoint", checkpoint_path, "Checkpoint (default: out_dir/best.ckpt)");

  CLI::App* report = app.add_subcommand("report", "Recompute metrics from score dumps");
  report->add_option("dumps", report_dumps, "Score dump files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) return cmd_synth_corpus(corpus_dir, corpus_clips, corpus_seed);
    if (*cache) return cmd_preprocess_cache(cache_flags);
    if (*train) return cmd_train(train_flags);
    if (*evalc) return cmd_eval(eval_flags, checkpoint_path);
    if (*report) return cmd_report(report_dumps);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
