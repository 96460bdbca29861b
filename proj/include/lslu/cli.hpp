// Copyright 2026 The LSLU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lslu/checkpoint.hpp"
#include "lslu/eval.hpp"
#include "lslu/finetune.hpp"
#include "lslu/grammars.hpp"
#include "lslu/kvconfig.hpp"
#include "lslu/pipeline.hpp"
#include "lslu/pretrainer.hpp"

namespace lslu::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kNumeric = 5 };

enum class LogLevel { error = 0, info = 1, debug = 2 };

class Logger {
 public:
  explicit Logger(std::ostream& os) : os_(os) {
    if (const char* v = std::getenv("LSLU_LOG")) {
      const std::string s = v;
      if (s == "error") level_ = LogLevel::error;
      else if (s == "debug") level_ = LogLevel::debug;
      else level_ = LogLevel::info;
    }
  }
  void info(const std::string& m) const { emit(LogLevel::info, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::debug, "debug", m); }
  void error(const std::string& m) const { emit(LogLevel::error, "error", m); }

 private:
  void emit(LogLevel l, const char* tag, const std::string& m) const {
    if (static_cast<int>(l) <= static_cast<int>(level_)) os_ << "[" << tag << "] " << m << '\n';
  }
  std::ostream& os_;
  LogLevel level_ = LogLevel::info;
};

struct Flags {
  std::string config, out, backbone, light, variant, regime, domain, data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> tasks;
  std::vector<std::string> sets;
  std::vector<std::string> inputs;
};

namespace detail {

namespace fs = std::filesystem;

inline std::string fmt_double(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// File, then --set overrides, then dedicated flags.
inline KvConfig effective_config(const Flags& f) {
  KvConfig kv;
  if (!f.config.empty()) kv = KvConfig::load(f.config);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  auto put = [&kv](const char* key, const std::string& v) {
    if (!v.empty()) kv.set(key, v);
  };
  put("out", f.out);
  put("backbone", f.backbone);
  put("light", f.light);
  put("variant", f.variant);
  put("regime", f.regime);
  put("domain", f.domain);
  put("data", f.data);
  if (f.seed) kv.set("seed", std::to_string(*f.seed));
  if (f.tasks) kv.set("tasks", std::to_string(*f.tasks));
  return kv;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string path_in(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed for " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline BackboneConfig backbone_preset(const std::string& name, std::size_t vocab_size) {
  if (name == "paper") return BackboneConfig::paper();
  if (name == "toy") return BackboneConfig::toy(vocab_size);
  throw ConfigError("config field 'backbone': expected toy or paper, got '" + name + "'");
}

inline BackboneConfig backbone_from_kv(const KvConfig& kv, std::size_t vocab_size) {
  auto c = backbone_preset(kv.get("backbone", "toy"), vocab_size);
  c.n_layers = kv.get_size("backbone.n_layers", c.n_layers);
  c.d_model = kv.get_size("backbone.d_model", c.d_model);
  c.n_heads = kv.get_size("backbone.n_heads", c.n_heads);
  c.d_ff = kv.get_size("backbone.d_ff", c.d_ff);
  c.max_positions = kv.get_size("backbone.max_positions", c.max_positions);
  c.dropout = kv.get_double("backbone.dropout", c.dropout);
  c.validate();
  return c;
}

inline LightEncoderConfig light_from_kv(const KvConfig& kv, const std::string& variant,
                                        std::size_t d_model) {
  const std::size_t def_hidden = d_model >= 768 ? 256 : 64;
  LightEncoderConfig c;
  if (variant == "full") {
    c.pooling = Pooling::last_layer;
    c.use_bilstm = false;
    c.dense_out = d_model;
  } else {
    c = LightEncoderConfig::variant(variant, kv.get_size("light.lstm_hidden", def_hidden));
  }
  c.lstm_layers = kv.get_size("light.lstm_layers", c.lstm_layers);
  c.dense_out = kv.get_size("light.dense_out", c.dense_out);
  c.dropout = kv.get_double("light.dropout", c.dropout);
  const auto rep = kv.get("light.utterance_rep", "cls");
  if (rep != "cls" && rep != "mean")
    throw ConfigError("config field 'light.utterance_rep': expected cls or mean, got '" + rep + "'");
  c.utterance_rep = rep == "mean" ? UtteranceRep::mean : UtteranceRep::cls;
  c.validate();
  return c;
}

inline AdamConfig adam_from_kv(const KvConfig& kv, double default_lr) {
  AdamConfig a;
  a.lr = kv.get_double("lr", default_lr);
  a.clip_norm = kv.get_double("clip_norm", 0.0);
  if (!(a.lr > 0.0)) throw ConfigError("config field 'lr': must be positive");
  return a;
}

inline std::vector<std::string> data_dirs(const KvConfig& kv) {
  auto dirs = split_labels(kv.require("data"));
  if (dirs.empty()) throw ConfigError("config field 'data': no directories given");
  return dirs;
}

inline void write_finetune_metrics(const std::string& path, const FinetuneTrace& t) {
  std::ostringstream os;
  os << "epoch\ttrain_loss\tic_accuracy\tsl_f1\n";
  char buf[128];
  for (const auto& e : t.epochs) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\n", e.epoch, e.train_loss,
                  e.ic_accuracy, e.sl_f1);
    os << buf;
  }
  write_text(path, os.str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_datagen(const KvConfig& kv, std::ostream& out, const Logger& log) {
  const auto g = datasim::grammar_by_name(kv.require("domain"));
  const std::string dir = kv.require("out");
  DatagenConfig c;
  c.train_size = kv.get_size("train_size", c.train_size);
  c.test_size = kv.get_size("test_size", c.test_size);
  c.pair_count = kv.get_size("pair_count", c.pair_count);
  c.test_wer = kv.get_double("test_wer", c.test_wer);
  c.pair_wer = kv.get_double("pair_wer", c.pair_wer);
  c.seed = kv.get_u64("seed", 0);
  const auto d = generate_domain_data(g, c);
  detail::ensure_dir(dir);
  datasim::save_labeled(detail::path_in(dir, "train.tsv"), d.train);
  datasim::save_labeled(detail::path_in(dir, "test.tsv"), d.test);
  datasim::save_labeled(detail::path_in(dir, "test_noisy.tsv"), d.test_noisy);
  save_pairs(detail::path_in(dir, "pairs.tsv"), d.pairs);
  detail::write_text(detail::path_in(dir, "schema.txt"), d.schema.serialize());
  std::vector<std::vector<std::string>> refs, hyps;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    refs.push_back(d.test[i].tokens);
    hyps.push_back(d.test_noisy[i].tokens);
  }
  const auto wer = datasim::corpus_wer(refs, hyps);
  log.info("datagen: wrote " + dir);
  out << "domain " << g.domain << "\ntrain " << d.train.size() << "\ntest " << d.test.size()
      << "\npairs " << d.pairs.size() << "\ntest_noisy_wer " << detail::fmt_double(wer.value(), "%.4f")
      << '\n';
  return kOk;
}

inline std::vector<ConversationPair> load_all_pairs(const KvConfig& kv) {
  std::vector<ConversationPair> pairs;
  for (const auto& dir : detail::data_dirs(kv))
    for (auto& p : load_pairs(detail::path_in(dir, "pairs.tsv"))) pairs.push_back(std::move(p));
  return pairs;
}

inline int cmd_pretrain(const KvConfig& kv, std::ostream& out, const Logger& log) {
  const Vocab vocab = datasim::builtin_vocab();
  const auto bc = detail::backbone_from_kv(kv, vocab.size());
  const std::string dir = kv.require("out");
  auto cfg = PretrainConfig::defaults(parse_regime(kv.get("regime", "clm")));
  cfg.epochs = kv.get_size("epochs", cfg.epochs);
  cfg.batch_size = kv.get_size("batch_size", cfg.batch_size);
  cfg.seed = kv.get_u64("seed", 0);
  cfg.adam = detail::adam_from_kv(kv, 1e-3);
  if (kv.has("mask_mode")) cfg.masking.mode = parse_mask_mode(kv.require("mask_mode"));
  cfg.masking.mask_rate = kv.get_double("mask_rate", cfg.masking.mask_rate);
  cfg.masking.whole_span_prob = kv.get_double("whole_span_prob", cfg.masking.whole_span_prob);
  cfg.plain_masking.mask_rate = cfg.masking.mask_rate;
  cfg.plain_ratio = kv.get_double("plain_ratio", cfg.plain_ratio);
  const auto pairs = load_all_pairs(kv);
  Backbone backbone(bc, derive_seed(cfg.seed, 100));
  log.info("pretrain: regime " + to_string(cfg.regime) + ", " + std::to_string(pairs.size()) +
           " pairs, " + std::to_string(cfg.epochs) + " epochs");
  PretrainOptions opts;
  opts.on_step = [&log](const StepRecord& r) {
    log.debug("step " + std::to_string(r.step) + " loss " + detail::fmt_double(r.loss));
  };
  const auto trace = pretrain(backbone, pairs, vocab, cfg, opts);
  detail::ensure_dir(dir);
  save_backbone(detail::path_in(dir, "backbone.ckpt"), backbone, vocab);
  save_metrics(detail::path_in(dir, "pretrain_metrics.tsv"), trace);
  out << "regime " << to_string(cfg.regime) << "\nsteps " << trace.steps.size()
      << "\ninitial_loss " << detail::fmt_double(trace.initial_loss()) << "\nfinal_loss "
      << detail::fmt_double(trace.final_loss()) << "\nfinal_masked_acc "
      << detail::fmt_double(trace.epoch_accuracy.back()) << '\n';
  return kOk;
}

inline LoadedBackbone load_frozen_backbone(const KvConfig& kv) {
  auto lb = load_backbone(kv.require("backbone"));
  lb.backbone.freeze();
  return lb;
}

inline DomainSchema load_schema(const std::string& dir) {
  return DomainSchema::load(detail::path_in(dir, "schema.txt"));
}

inline int cmd_init_light(const KvConfig& kv, std::ostream& out, const Logger& log) {
  auto lb = load_frozen_backbone(kv);
  const auto& bc = lb.backbone.config();
  const std::string variant = kv.get("variant", "concat-lstm");
  if (variant == "full") throw ConfigError("config field 'variant': init-light does not apply to full");
  const auto lc = detail::light_from_kv(kv, variant, bc.d_model);
  const std::string data = detail::data_dirs(kv).front();
  const auto schema = load_schema(data);
  const auto train = datasim::load_labeled(detail::path_in(data, "train.tsv"));
  std::vector<std::vector<std::string>> texts;
  for (const auto& u : train) texts.push_back(u.tokens);
  LightInitConfig cfg;
  cfg.epochs = kv.get_size("epochs", cfg.epochs);
  cfg.batch_size = kv.get_size("batch_size", cfg.batch_size);
  cfg.seed = kv.get_u64("seed", 0);
  cfg.adam = detail::adam_from_kv(kv, 1e-3);
  LightEncoder light(lc, bc.n_layers, bc.d_model, schema, derive_seed(cfg.seed, 200));
  const auto before = lb.backbone.checksum();
  log.info("init-light: " + variant + " on " + std::to_string(texts.size()) + " utterances");
  const auto trace = init_light_encoder_mlm(lb.backbone, light, texts, lb.vocab, cfg);
  if (lb.backbone.checksum() != before) throw NumericError("init-light: backbone changed");
  const std::string dir = kv.require("out");
  detail::ensure_dir(dir);
  save_light(detail::path_in(dir, "light.ckpt"), light, bc);
  save_metrics(detail::path_in(dir, "init_metrics.tsv"), trace);
  out << "variant " << variant << "\ninitial_loss " << detail::fmt_double(trace.initial_loss())
      << "\nfinal_loss " << detail::fmt_double(trace.final_loss()) << '\n';
  return kOk;
}

inline int cmd_finetune(const KvConfig& kv, std::ostream& out, const Logger& log) {
  auto lb = load_backbone(kv.require("backbone"));
  const auto& bc = lb.backbone.config();
  const std::string variant = kv.get("variant", "concat-lstm");
  const std::string data = detail::data_dirs(kv).front();
  const auto schema = load_schema(data);
  const auto train = datasim::load_labeled(detail::path_in(data, "train.tsv"));
  const auto test = datasim::load_labeled(detail::path_in(data, "test.tsv"));
  FinetuneConfig cfg;
  cfg.epochs = kv.get_size("epochs", cfg.epochs);
  cfg.batch_size = kv.get_size("batch_size", cfg.batch_size);
  cfg.seed = kv.get_u64("seed", 0);
  cfg.adam = detail::adam_from_kv(kv, variant == "full" ? 1e-4 : 1e-3);
  LightEncoder light;
  if (kv.has("light")) {
    light = load_light(kv.require("light"), bc);
    if (light.config().variant_name() != variant)
      throw ConfigError("config field 'variant': light checkpoint is " +
                        light.config().variant_name() + ", not " + variant);
    if (!(light.schema().intents == schema.intents && light.schema().slot_labels == schema.slot_labels))
      throw ConfigError("light checkpoint schema does not match " + data + "/schema.txt");
  } else {
    light = LightEncoder(detail::light_from_kv(kv, variant, bc.d_model), bc.n_layers, bc.d_model,
                         schema, derive_seed(cfg.seed, 200));
  }
  const std::string dir = kv.require("out");
  log.info("finetune: " + variant + " on " + std::to_string(train.size()) + " utterances");
  FinetuneTrace trace;
  if (variant == "full") {
    trace = finetune_full(lb.backbone, light, lb.vocab, train, test, cfg);
    detail::ensure_dir(dir);
    lb.backbone.freeze();
    save_backbone(detail::path_in(dir, "backbone.ckpt"), lb.backbone, lb.vocab);
  } else {
    lb.backbone.freeze();
    const auto before = lb.backbone.checksum();
    trace = finetune(lb.backbone, light, lb.vocab, train, test, cfg);
    if (lb.backbone.checksum() != before) throw NumericError("finetune: backbone changed");
    detail::ensure_dir(dir);
  }
  save_light(detail::path_in(dir, "light.ckpt"), light, bc);
  detail::write_finetune_metrics(detail::path_in(dir, "finetune_metrics.tsv"), trace);
  const auto& last = trace.epochs.back();
  out << "variant " << variant << "\nepochs " << trace.epochs.size() << "\ntrain_loss "
      << detail::fmt_double(last.train_loss) << "\nic_accuracy " << detail::fmt_double(last.ic_accuracy)
      << "\nsl_f1 " << detail::fmt_double(last.sl_f1) << '\n';
  return kOk;
}

inline int cmd_eval(const KvConfig& kv, std::ostream& out, const Logger& log) {
  auto lb = load_frozen_backbone(kv);
  const auto light = load_light(kv.require("light"), lb.backbone.config());
  const std::string model = kv.get("model_name", light.config().variant_name());
  std::ostringstream tsv;
  tsv << "model\tdomain\tsplit\tic_accuracy\tic_macro_f1\tsl_f1\n";
  for (const auto& dir : detail::data_dirs(kv)) {
    for (const char* split : {"test", "test_noisy"}) {
      const auto path = detail::path_in(dir, std::string(split) + ".tsv");
      if (!std::filesystem::exists(path)) continue;
      const auto data = datasim::load_labeled(path);
      const auto s = evaluate_slu(lb.backbone, light, lb.vocab, data);
      const std::string domain = data.empty() ? light.schema().domain : data.front().domain;
      tsv << model << '\t' << domain << '\t' << split << '\t' << detail::fmt_double(s.ic_accuracy)
          << '\t' << detail::fmt_double(s.ic.macro_f1) << '\t' << detail::fmt_double(s.sl_f1) << '\n';
      log.info("eval: " + domain + "/" + split + " done");
    }
  }
  if (kv.has("out")) {
    const std::string dir = kv.require("out");
    detail::ensure_dir(dir);
    detail::write_text(detail::path_in(dir, "eval.tsv"), tsv.str());
  }
  out << tsv.str();
  return kOk;
}

inline std::string params_block(const std::string& variant, const ParamReport& r) {
  std::ostringstream os;
  os << "variant " << variant << "\nbackbone_params " << r.backbone_params << "\nlight_params "
     << r.light_params << "\ntrained_per_task " << r.trained_per_task << "\nper_task_fraction "
     << detail::fmt_double(r.per_task_fraction * 100.0, "%.2f%%") << "\ntasks " << r.k_tasks
     << "\nmultiplier " << detail::fmt_double(r.multiplier, "%.3f") << '\n';
  return os.str();
}

inline ParamReport params_for(const KvConfig& kv, const std::string& variant) {
  const std::string preset = kv.get("backbone", "paper");
  const std::size_t vocab = kv.get_size("vocab_size", preset == "paper" ? BackboneConfig::paper().vocab_size
                                                                      : datasim::builtin_vocab().size());
  auto bc = detail::backbone_preset(preset, vocab);
  bc.vocab_size = vocab;
  const auto schema = synthetic_schema(kv.get_size("intents", 7), kv.get_size("slot_types", 47));
  const auto lc = detail::light_from_kv(kv, variant, bc.d_model);
  return count_parameters(bc, lc, schema, kv.get_size("tasks", 5),
                          variant == "full" ? FinetuneMode::full : FinetuneMode::shared_backbone);
}

inline const std::vector<std::pair<std::string, std::string>>& variant_labels() {
  static const std::vector<std::pair<std::string, std::string>> v = {
      {"full", "Full fine-tuning"},
      {"concat-lstm", "Concat+LSTM"},
      {"linear-lstm", "Linear+LSTM"},
      {"lastlayer-lstm", "LastLayer+LSTM"},
      {"concat", "Concat"}};
  return v;
}

inline int cmd_params(const KvConfig& kv, std::ostream& out, const Logger&) {
  const std::string variant = kv.get("variant", "all");
  if (variant != "all") {
    out << params_block(variant, params_for(kv, variant));
    return kOk;
  }
  ReportSpec spec;
  for (const auto& [v, label] : variant_labels()) spec.params.push_back({label, params_for(kv, v)});
  out << render_report(spec);
  return kOk;
}

inline int cmd_report(const KvConfig& kv, const std::vector<std::string>& inputs, std::ostream& out,
                      const Logger&) {
  if (inputs.empty()) throw ConfigError("report: no eval.tsv inputs given");
  ReportSpec spec;
  std::map<std::string, std::map<std::string, DomainScore>> scores;
  std::vector<std::string> models;
  for (const auto& path : inputs) {
    std::istringstream is(detail::read_text(path));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto f = split_tabs(line);
      if (f.size() != 6) throw IoError(path + ": expected 6 fields per line");
      const std::string col = f[2] == "test" ? f[1] : f[1] + "/" + "noisy";
      if (std::find(spec.domains.begin(), spec.domains.end(), col) == spec.domains.end())
        spec.domains.push_back(col);
      if (std::find(models.begin(), models.end(), f[0]) == models.end()) models.push_back(f[0]);
      scores[f[0]][col] = {std::stod(f[3]), std::stod(f[5])};
    }
  }
  for (const auto& m : models) {
    MetricsRow row{m, {}};
    for (const auto& d : spec.domains) {
      auto it = scores[m].find(d);
      if (it == scores[m].end()) throw ValueError("report: model " + m + " has no scores for " + d);
      row.scores.push_back(it->second);
    }
    spec.rows.push_back(std::move(row));
  }
  if (kv.has("baseline")) {
    const auto b = kv.require("baseline");
    auto it = std::find(models.begin(), models.end(), b);
    if (it == models.end()) throw ConfigError("config field 'baseline': no model named " + b);
    spec.baseline = static_cast<std::size_t>(it - models.begin());
  }
  for (const auto& [v, label] : variant_labels()) spec.params.push_back({label, params_for(kv, v)});
  const auto text = render_report(spec);
  if (kv.has("out")) detail::write_text(kv.require("out"), text);
  out << text;
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Light-encoder spoken language understanding toolkit", "lslu"};
  app.require_subcommand(1, 1);
  Flags f;
  auto add_common = [&f](CLI::App* sc) {
    sc->add_option("--config", f.config, "key = value settings file");
    sc->add_option("--seed", f.seed, "seed for all randomness");
    sc->add_option("--out", f.out, "output directory or file");
    sc->add_option("--set", f.sets, "override a setting: key=value")->take_all();
  };
  auto* datagen = app.add_subcommand("datagen", "generate labeled, noisy, and pair corpora");
  add_common(datagen);
  datagen->add_option("--domain", f.domain, "music, shopping, or weather");
  auto* pre = app.add_subcommand("pretrain", "pre-train a backbone");
  add_common(pre);
  pre->add_option("--regime", f.regime, "clm, query_only, or plain_mlm");
  pre->add_option("--data", f.data, "comma-separated datagen directories");
  pre->add_option("--backbone", f.backbone, "size preset: toy or paper");
  auto* init = app.add_subcommand("init-light", "MLM-initialize a light encoder");
  add_common(init);
  init->add_option("--backbone", f.backbone, "backbone checkpoint");
  init->add_option("--variant", f.variant, "concat-lstm, linear-lstm, lastlayer-lstm, concat");
  init->add_option("--data", f.data, "datagen directory");
  auto* ft = app.add_subcommand("finetune", "train a light encoder (or the whole model) on a domain");
  add_common(ft);
  ft->add_option("--backbone", f.backbone, "backbone checkpoint");
  ft->add_option("--light", f.light, "initial light-encoder checkpoint");
  ft->add_option("--variant", f.variant, "concat-lstm, linear-lstm, lastlayer-lstm, concat, full");
  ft->add_option("--data", f.data, "datagen directory");
  auto* ev = app.add_subcommand("eval", "score a trained model on test splits");
  add_common(ev);
  ev->add_option("--backbone", f.backbone, "backbone checkpoint");
  ev->add_option("--light", f.light, "light-encoder checkpoint");
  ev->add_option("--data", f.data, "comma-separated datagen directories");
  ev->add_option("--domain", f.domain, "unused; accepted for symmetry");
  auto* par = app.add_subcommand("params", "analytic parameter accounting");
  add_common(par);
  par->add_option("--backbone", f.backbone, "size preset: paper or toy");
  par->add_option("--variant", f.variant, "variant name, full, or all");
  par->add_option("--tasks", f.tasks, "number of tasks sharing the backbone");
  auto* rep = app.add_subcommand("report", "render a results table from eval.tsv files");
  add_common(rep);
  rep->add_option("inputs", f.inputs, "eval.tsv files");
  rep->add_option("--backbone", f.backbone, "size preset for the parameter columns");
  rep->add_option("--tasks", f.tasks, "number of tasks sharing the backbone");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const Logger log(err);
  try {
    const KvConfig kv = detail::effective_config(f);
    if (datagen->parsed()) return cmd_datagen(kv, out, log);
    if (pre->parsed()) return cmd_pretrain(kv, out, log);
    if (init->parsed()) return cmd_init_light(kv, out, log);
    if (ft->parsed()) return cmd_finetune(kv, out, log);
    if (ev->parsed()) return cmd_eval(kv, out, log);
    if (par->parsed()) return cmd_params(kv, out, log);
    if (rep->parsed()) return cmd_report(kv, f.inputs, out, log);
    err << app.help();
    return kUsage;
  } catch (const ConfigError& e) {
    log.error(e.what());
    return kConfig;
  } catch (const IoError& e) {
    log.error(e.what());
    return kIo;
  } catch (const NumericError& e) {
    log.error(e.what());
    return kNumeric;
  } catch (const ValueError& e) {
    log.error(e.what());
    return kConfig;
  } catch (const ShapeError& e) {
    log.error(e.what());
    return kConfig;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kFailure;
  }
}

}  // namespace lslu::cli
