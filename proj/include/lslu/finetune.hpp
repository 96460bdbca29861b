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

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "lslu/backbone.hpp"
#include "lslu/datasim.hpp"
#include "lslu/eval.hpp"
#include "lslu/light_encoder.hpp"
#include "lslu/optim.hpp"

namespace lslu {

struct FinetuneConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  bool evaluate_each_epoch = true;

  void validate() const {
    if (epochs == 0) throw ConfigError("finetune: epochs must be positive");
    if (batch_size == 0) throw ConfigError("finetune: batch_size must be positive");
    if (!(adam.lr > 0.0)) throw ConfigError("finetune: lr must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean joint loss per utterance
  double ic_accuracy = 0.0;
  double sl_f1 = 0.0;
};

struct FinetuneTrace {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> trained;  // parameters that received gradients
  double wall_seconds = 0.0;

  /// First epoch (1-based) whose training loss is at or below `threshold`;
  /// epochs.size() + 1 if never reached.
  std::size_t epochs_to_loss(double threshold) const {
    for (const auto& e : epochs)
      if (e.train_loss <= threshold) return e.epoch;
    return epochs.size() + 1;
  }
};

struct SluScores {
  double ic_accuracy = 0.0;
  double sl_f1 = 0.0;
  IcMetrics ic;
  SpanF1 sl;
};

/// Utterance prepared for the light encoder: backbone activations plus
/// label ids.
struct EncodedUtterance {
  LayerActivations acts;
  int intent = 0;
  std::vector<int> slots;
  std::vector<std::string> tags;
  std::string intent_name;
};

inline EncodedUtterance encode_utterance(const Backbone& backbone, const Vocab& vocab,
                                         const DomainSchema& schema, const datasim::LabeledUtterance& u) {
  if (u.tokens.empty()) throw ValueError("finetune: empty utterance");
  if (u.tags.size() != u.tokens.size())
    throw ValueError("finetune: " + std::to_string(u.tags.size()) + " tags for " +
                     std::to_string(u.tokens.size()) + " tokens");
  EncodedUtterance e;
  e.acts = utterance_activations(backbone, vocab, u.tokens);
  e.intent = schema.intent_id(u.intent);
  e.intent_name = u.intent;
  for (const auto& t : u.tags) e.slots.push_back(schema.slot_id(t));
  e.tags = u.tags;
  return e;
}

inline std::vector<EncodedUtterance> encode_corpus(const Backbone& backbone, const Vocab& vocab,
                                                   const DomainSchema& schema,
                                                   const std::vector<datasim::LabeledUtterance>& data) {
  std::vector<EncodedUtterance> out;
  out.reserve(data.size());
  for (const auto& u : data) out.push_back(encode_utterance(backbone, vocab, schema, u));
  return out;
}

inline SluScores score_predictions(const std::vector<Prediction>& preds,
                                   const std::vector<std::string>& gold_intents,
                                   const std::vector<std::vector<std::string>>& gold_tags) {
  std::vector<std::string> pi;
  std::vector<std::vector<std::string>> pt;
  for (const auto& p : preds) {
    pi.push_back(p.intent);
    pt.push_back(p.tags);
  }
  SluScores s;
  s.ic = ic_metrics(pi, gold_intents);
  s.sl = sl_span_f1(pt, gold_tags);
  s.ic_accuracy = s.ic.accuracy;
  s.sl_f1 = s.sl.f1;
  return s;
}

inline SluScores evaluate_encoded(const LightEncoder& light, const std::vector<EncodedUtterance>& data) {
  if (data.empty()) throw ValueError("evaluate: no utterances");
  std::vector<Prediction> preds;
  std::vector<std::string> gi;
  std::vector<std::vector<std::string>> gt;
  for (const auto& e : data) {
    preds.push_back(predict_from_activations(light, e.acts));
    gi.push_back(e.intent_name);
    gt.push_back(e.tags);
  }
  return score_predictions(preds, gi, gt);
}

inline SluScores evaluate_slu(const Backbone& backbone, const LightEncoder& light, const Vocab& vocab,
                              const std::vector<datasim::LabeledUtterance>& data) {
  if (data.empty()) throw ValueError("evaluate: no utterances");
  std::vector<Prediction> preds;
  std::vector<std::string> gi;
  std::vector<std::vector<std::string>> gt;
  for (const auto& u : data) {
    preds.push_back(predict(backbone, light, vocab, u.tokens));
    gi.push_back(u.intent);
    gt.push_back(u.tags);
  }
  return score_predictions(preds, gi, gt);
}

namespace detail {

inline void record_trained(FinetuneTrace& trace, const std::vector<ParameterStore*>& stores) {
  if (!trace.trained.empty()) return;
  for (auto* s : stores)
    for (const auto& p : *s)
      if (p.has_grad()) trace.trained.push_back(p.name);
}

}  // namespace detail

/// Trains only the light encoder over cached activations of a frozen
/// backbone. Output layers are re-initialized first.
inline FinetuneTrace finetune(const Backbone& backbone, LightEncoder& light,
                              const std::vector<EncodedUtterance>& train,
                              const std::vector<EncodedUtterance>& heldout,
                              const FinetuneConfig& cfg) {
  if (!backbone.frozen()) throw ConfigError("finetune: backbone is not frozen");
  if (train.empty()) throw ValueError("finetune: empty training set");
  cfg.validate();
  if (light.n_layers() != backbone.config().n_layers || light.d_model() != backbone.config().d_model)
    throw ConfigError("finetune: light encoder geometry does not match the backbone");
  const auto t0 = std::chrono::steady_clock::now();
  light.reset_heads(derive_seed(cfg.seed, 31));
  Rng order_rng(derive_seed(cfg.seed, 32));
  Rng drop_rng(derive_seed(cfg.seed, 33));
  Adam adam(cfg.adam);
  FinetuneTrace trace;
  const auto stores = light.stores();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      Tape tape;
      std::vector<Var> losses;
      for (std::size_t k = b; k < e; ++k) {
        const auto& u = train[order[k]];
        const LightOutputs out = light.forward(tape, u.acts, true, &drop_rng);
        losses.push_back(light.joint_loss(tape, out, u.intent, u.slots));
      }
      Var sum = losses.size() == 1 ? losses[0] : ops::sum(ops::concat_cols(losses));
      Var loss = ops::scale(sum, 1.0 / static_cast<double>(e - b));
      const double lv = loss.value().item();
      if (!std::isfinite(lv))
        throw NumericError("finetune: non-finite loss in epoch " + std::to_string(epoch));
      tape.backward(loss);
      detail::record_trained(trace, stores);
      adam.step(stores);
      total += lv * static_cast<double>(e - b);
    }
    EpochRecord rec{epoch, total / static_cast<double>(train.size()), 0.0, 0.0};
    if (cfg.evaluate_each_epoch && !heldout.empty()) {
      const auto s = evaluate_encoded(light, heldout);
      rec.ic_accuracy = s.ic_accuracy;
      rec.sl_f1 = s.sl_f1;
    }
    trace.epochs.push_back(rec);
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

inline FinetuneTrace finetune(const Backbone& backbone, LightEncoder& light, const Vocab& vocab,
                              const std::vector<datasim::LabeledUtterance>& train,
                              const std::vector<datasim::LabeledUtterance>& heldout,
                              const FinetuneConfig& cfg) {
  if (!backbone.frozen()) throw ConfigError("finetune: backbone is not frozen");
  const auto& schema = light.schema();
  return finetune(backbone, light, encode_corpus(backbone, vocab, schema, train),
                  encode_corpus(backbone, vocab, schema, heldout), cfg);
}

/// Whole-model baseline: backbone and light encoder are both trained.
inline FinetuneTrace finetune_full(Backbone& backbone, LightEncoder& light, const Vocab& vocab,
                                   const std::vector<datasim::LabeledUtterance>& train,
                                   const std::vector<datasim::LabeledUtterance>& heldout,
                                   const FinetuneConfig& cfg) {
  if (train.empty()) throw ValueError("finetune: empty training set");
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  backbone.unfreeze();
  backbone.params().at("mlm.bias").trainable = false;  // unused downstream
  light.reset_heads(derive_seed(cfg.seed, 31));
  Rng order_rng(derive_seed(cfg.seed, 32));
  Rng drop_rng(derive_seed(cfg.seed, 33));
  Adam adam(cfg.adam);
  FinetuneTrace trace;
  std::vector<ParameterStore*> stores = light.stores();
  stores.insert(stores.begin(), &backbone.params());
  const auto& schema = light.schema();
  struct Row {
    CLMExample input;
    int intent;
    std::vector<int> slots;
  };
  std::vector<Row> rows;
  for (const auto& u : train) {
    if (u.tokens.empty()) throw ValueError("finetune: empty utterance");
    Row r{utterance_input(u.tokens, vocab), schema.intent_id(u.intent), {}};
    for (const auto& t : u.tags) r.slots.push_back(schema.slot_id(t));
    if (r.slots.size() != u.tokens.size()) throw ValueError("finetune: tag/token count mismatch");
    rows.push_back(std::move(r));
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, order_rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      Tape tape;
      std::vector<Var> losses;
      for (std::size_t k = b; k < e; ++k) {
        const auto& r = rows[order[k]];
        auto layers = backbone.encode(tape, r.input.input_ids, r.input.type_ids,
                                      r.input.attention_mask, true, &drop_rng);
        const LightOutputs out = light.forward_vars(tape, layers, true, &drop_rng);
        losses.push_back(light.joint_loss(tape, out, r.intent, r.slots));
      }
      Var sum = losses.size() == 1 ? losses[0] : ops::sum(ops::concat_cols(losses));
      Var loss = ops::scale(sum, 1.0 / static_cast<double>(e - b));
      const double lv = loss.value().item();
      if (!std::isfinite(lv))
        throw NumericError("finetune: non-finite loss in epoch " + std::to_string(epoch));
      tape.backward(loss);
      detail::record_trained(trace, stores);
      adam.step(stores);
      total += lv * static_cast<double>(e - b);
    }
    EpochRecord rec{epoch, total / static_cast<double>(rows.size()), 0.0, 0.0};
    if (cfg.evaluate_each_epoch && !heldout.empty()) {
      const auto s = evaluate_slu(backbone, light, vocab, heldout);
      rec.ic_accuracy = s.ic_accuracy;
      rec.sl_f1 = s.sl_f1;
    }
    trace.epochs.push_back(rec);
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

}  // namespace lslu
