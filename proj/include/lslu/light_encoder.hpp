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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/backbone.hpp"
#include "lslu/bio.hpp"
#include "lslu/clm_data.hpp"
#include "lslu/crf.hpp"
#include "lslu/optim.hpp"
#include "lslu/random.hpp"

namespace lslu {

enum class Pooling { concat_all, learned_linear, last_layer };
enum class UtteranceRep { cls, mean };

inline std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::concat_all: return "concat_all";
    case Pooling::learned_linear: return "learned_linear";
    case Pooling::last_layer: return "last_layer";
  }
  return "?";
}

inline Pooling parse_pooling(const std::string& s) {
  if (s == "concat_all") return Pooling::concat_all;
  if (s == "learned_linear") return Pooling::learned_linear;
  if (s == "last_layer") return Pooling::last_layer;
  throw ConfigError("unknown pooling '" + s + "'");
}

struct LightEncoderConfig {
  Pooling pooling = Pooling::concat_all;
  bool use_bilstm = true;
  std::size_t lstm_hidden = 256;
  std::size_t lstm_layers = 2;
  std::size_t dense_out = 0;  // 0: same as lstm_hidden
  double dropout = 0.1;
  UtteranceRep utterance_rep = UtteranceRep::cls;

  std::size_t dense_width() const { return dense_out ? dense_out : lstm_hidden; }
  std::size_t rep_width() const { return use_bilstm ? 2 * lstm_hidden : dense_width(); }
  std::size_t pool_width(std::size_t n_layers, std::size_t d_model) const {
    return pooling == Pooling::concat_all ? n_layers * d_model : d_model;
  }

  /// Named ablation variants: concat-lstm, linear-lstm, lastlayer-lstm, concat.
  static LightEncoderConfig variant(const std::string& name, std::size_t hidden = 256) {
    LightEncoderConfig c;
    c.lstm_hidden = hidden;
    if (name == "concat-lstm") {
      c.pooling = Pooling::concat_all;
    } else if (name == "linear-lstm") {
      c.pooling = Pooling::learned_linear;
    } else if (name == "lastlayer-lstm") {
      c.pooling = Pooling::last_layer;
    } else if (name == "concat") {
      c.pooling = Pooling::concat_all;
      c.use_bilstm = false;
    } else {
      throw ConfigError("unknown light-encoder variant '" + name +
                        "' (expected concat-lstm, linear-lstm, lastlayer-lstm, concat)");
    }
    return c;
  }

  std::string variant_name() const {
    if (!use_bilstm) {
      if (pooling == Pooling::concat_all) return "concat";
      return pooling == Pooling::last_layer ? "lastlayer" : "linear";
    }
    switch (pooling) {
      case Pooling::concat_all: return "concat-lstm";
      case Pooling::learned_linear: return "linear-lstm";
      case Pooling::last_layer: return "lastlayer-lstm";
    }
    return "custom";
  }

  void validate() const {
    if (lstm_hidden == 0) throw ConfigError("light encoder: lstm_hidden must be positive");
    if (use_bilstm && lstm_layers == 0)
      throw ConfigError("light encoder: lstm_layers must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw ConfigError("light encoder: dropout outside [0, 1)");
  }

  friend bool operator==(const LightEncoderConfig&, const LightEncoderConfig&) = default;
};

/// Output of the trainable stack for one utterance.
struct LightOutputs {
  Var ic_logits;  // [1 x n_intents]
  Var emissions;  // [n_tokens x n_slots]
};

/// Per-domain trainable stack on top of frozen backbone activations:
/// pooling -> dense(GELU) -> optional BiLSTM -> IC softmax head + CRF head.
///
/// Parameters live in two stores: `encoder()` (mixer, dense, LSTM), which
/// is what the MLM initialization trains, and `heads()` (IC and CRF), which
/// are freshly initialized for each fine-tuning run.
class LightEncoder {
 public:
  LightEncoder() = default;

  LightEncoder(const LightEncoderConfig& cfg, std::size_t n_layers, std::size_t d_model,
               DomainSchema schema, std::uint64_t seed = 0)
      : cfg_(cfg), n_layers_(n_layers), d_model_(d_model), schema_(std::move(schema)) {
    cfg_.validate();
    schema_.validate();
    if (n_layers == 0 || d_model == 0) throw ConfigError("light encoder: empty backbone geometry");
    Rng rng(seed);
    const std::size_t pw = cfg_.pool_width(n_layers, d_model), dw = cfg_.dense_width();
    if (cfg_.pooling == Pooling::learned_linear) {
      encoder_.add("mixer.weights", Tensor({n_layers}, 0.0));
      encoder_.add("mixer.scale", Tensor({1}, 1.0));
    }
    encoder_.add("dense.W", glorot({pw, dw}, rng));
    encoder_.add("dense.b", Tensor({dw}, 0.0));
    if (cfg_.use_bilstm) {
      const std::size_t h = cfg_.lstm_hidden;
      for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
        const std::size_t in = l == 0 ? dw : 2 * h;
        for (const char* dir : {"fwd", "bwd"}) {
          const std::string p = lstm_prefix(l, dir);
          encoder_.add(p + "W_ih", glorot({in, 4 * h}, rng));
          encoder_.add(p + "W_hh", glorot({h, 4 * h}, rng));
          Tensor b({4 * h}, 0.0);
          for (std::size_t j = h; j < 2 * h; ++j) b[j] = 1.0;  // forget gate
          encoder_.add(p + "b", std::move(b));
        }
      }
    }
    reset_heads(derive_seed(seed, 1));
  }

  /// Fresh IC and CRF output layers.
  void reset_heads(std::uint64_t seed) {
    Rng rng(seed);
    heads_ = ParameterStore{};
    const std::size_t rw = cfg_.rep_width(), ni = schema_.n_intents(), ns = schema_.n_slots();
    heads_.add("ic.W", glorot({rw, ni}, rng));
    heads_.add("ic.b", Tensor({ni}, 0.0));
    heads_.add("crf.W", glorot({rw, ns}, rng));
    heads_.add("crf.b", Tensor({ns}, 0.0));
    heads_.add("crf.transitions", Tensor({ns, ns}, 0.0));
    heads_.add("crf.start", Tensor({ns}, 0.0));
    heads_.add("crf.stop", Tensor({ns}, 0.0));
  }

  const LightEncoderConfig& config() const { return cfg_; }
  const DomainSchema& schema() const { return schema_; }
  std::size_t n_layers() const { return n_layers_; }
  std::size_t d_model() const { return d_model_; }
  std::size_t pool_width() const { return cfg_.pool_width(n_layers_, d_model_); }

  ParameterStore& encoder() { return encoder_; }
  const ParameterStore& encoder() const { return encoder_; }
  ParameterStore& heads() { return heads_; }
  const ParameterStore& heads() const { return heads_; }
  std::vector<ParameterStore*> stores() { return {&encoder_, &heads_}; }
  std::size_t scalar_count() const { return encoder_.scalar_count() + heads_.scalar_count(); }

  /// Replaces weights (checkpoint load); shapes must match this geometry.
  void load_weights(const ParameterStore& encoder, const ParameterStore* heads) {
    auto copy_into = [](ParameterStore& dst, const ParameterStore& src, const char* what) {
      if (src.size() != dst.size())
        throw ConfigError(std::string("light encoder: ") + what + " expects " +
                          std::to_string(dst.size()) + " tensors, got " +
                          std::to_string(src.size()));
      for (auto& p : dst) {
        const auto* q = src.find(p.name);
        if (!q) throw ConfigError("light encoder: missing tensor '" + p.name + "'");
        if (q->value.shape() != p.value.shape())
          throw ShapeError("light encoder: tensor '" + p.name + "' has shape " +
                           shape_str(q->value.shape()) + ", expected " +
                           shape_str(p.value.shape()));
        p.value = q->value;
        p.trainable = q->trainable;
      }
    };
    copy_into(encoder_, encoder, "encoder");
    if (heads) copy_into(heads_, *heads, "heads");
  }

  // -- forward pieces -------------------------------------------------------

  /// Combines per-layer activations into [T x pool_width].
  Var pool(Tape& tape, const std::vector<Var>& layers) { return pool_impl(*this, tape, layers); }
  Var pool(Tape& tape, const std::vector<Var>& layers) const { return pool_impl(*this, tape, layers); }

  /// Dense projection and optional BiLSTM: [T x pool_width] -> [T x rep_width].
  Var encode(Tape& tape, Var pooled, bool train = false, Rng* rng = nullptr) {
    return encode_impl(*this, tape, pooled, train, rng);
  }
  Var encode(Tape& tape, Var pooled) const { return encode_impl(*this, tape, pooled, false, nullptr); }

  /// Utterance representation (row 0 or row mean) mapped to intent scores.
  Var ic_logits(Tape& tape, Var rep) { return ic_impl(*this, tape, rep); }
  Var ic_logits(Tape& tape, Var rep) const { return ic_impl(*this, tape, rep); }

  /// Slot emission scores for rows [begin, end) of `rep`.
  Var emissions(Tape& tape, Var rep, std::size_t begin, std::size_t end) {
    return emissions_impl(*this, tape, rep, begin, end);
  }
  Var emissions(Tape& tape, Var rep, std::size_t begin, std::size_t end) const {
    return emissions_impl(*this, tape, rep, begin, end);
  }

  /// Full forward over backbone activations of "[CLS] tokens [SEP]"; slot
  /// emissions cover the inner token rows only.
  LightOutputs forward(Tape& tape, const LayerActivations& acts, bool train = false,
                       Rng* rng = nullptr) {
    return forward_impl(*this, tape, acts, train, rng);
  }
  LightOutputs forward(Tape& tape, const LayerActivations& acts) const {
    return forward_impl(*this, tape, acts, false, nullptr);
  }
  LightOutputs forward_vars(Tape& tape, const std::vector<Var>& layers, bool train, Rng* rng) {
    return forward_vars_impl(*this, tape, layers, train, rng);
  }

  /// CE(intent) + CRF NLL(slots), weighted 1:1.
  Var joint_loss(Tape& tape, const LightOutputs& out, int gold_intent,
                 const std::vector<int>& gold_slots) {
    return joint_impl(*this, tape, out, gold_intent, gold_slots);
  }
  Var joint_loss(Tape& tape, const LightOutputs& out, int gold_intent,
                 const std::vector<int>& gold_slots) const {
    return joint_impl(*this, tape, out, gold_intent, gold_slots);
  }

  /// CRF parameters as plain tensors (for decoding).
  Tensor crf_transitions() const { return heads_.at("crf.transitions").value; }
  Tensor crf_start() const { return heads_.at("crf.start").value; }
  Tensor crf_stop() const { return heads_.at("crf.stop").value; }

 private:
  static Tensor glorot(Shape shape, Rng& rng) {
    const double fan_in = static_cast<double>(shape[0]), fan_out = static_cast<double>(shape[1]);
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t(std::move(shape));
    for (auto& v : t.vec()) v = uniform(rng, -a, a);
    return t;
  }

  static std::string lstm_prefix(std::size_t layer, const char* dir) {
    return "lstm.l" + std::to_string(layer) + "." + dir + ".";
  }

  template <typename Self>
  static Var pool_impl(Self& self, Tape& tape, const std::vector<Var>& layers) {
    if (layers.size() != self.n_layers_)
      throw ShapeError("pool: expected " + std::to_string(self.n_layers_) +
                       " layer activations, got " + std::to_string(layers.size()));
    for (const auto& l : layers)
      if (l.value().ndim() != 2 || l.cols() != self.d_model_)
        throw ShapeError("pool: activation " + shape_str(l.shape()) + " does not have width " +
                         std::to_string(self.d_model_));
    switch (self.cfg_.pooling) {
      case Pooling::concat_all:
        return layers.size() == 1 ? layers[0] : ops::concat_cols(layers);
      case Pooling::last_layer:
        return layers.back();
      case Pooling::learned_linear: {
        auto& P = self.encoder_;
        Var w = ops::reshape(tape.param(P.at("mixer.weights")), {1, self.n_layers_});
        Var mix = ops::weighted_sum(layers, ops::softmax_rows(w));
        return ops::scale_by(mix, tape.param(P.at("mixer.scale")));
      }
    }
    throw ConfigError("pool: unknown strategy");
  }

  template <typename Self>
  static Var lstm_direction(Self& self, Tape& tape, Var x, std::size_t layer, bool forward) {
    auto& P = self.encoder_;
    const std::string p = lstm_prefix(layer, forward ? "fwd" : "bwd");
    const std::size_t T = x.rows(), h = self.cfg_.lstm_hidden;
    Var xw = ops::add_bias(ops::matmul(x, tape.param(P.at(p + "W_ih"))), tape.param(P.at(p + "b")));
    Var whh = tape.param(P.at(p + "W_hh"));
    std::vector<Var> outs(T);
    Var hprev{}, cprev{};
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = forward ? s : T - 1 - s;
      Var gates = ops::slice_rows(xw, t, t + 1);
      if (s > 0) gates = ops::add(gates, ops::matmul(hprev, whh));
      Var i = ops::sigmoid(ops::slice_cols(gates, 0, h));
      Var f = ops::sigmoid(ops::slice_cols(gates, h, 2 * h));
      Var g = ops::tanh(ops::slice_cols(gates, 2 * h, 3 * h));
      Var o = ops::sigmoid(ops::slice_cols(gates, 3 * h, 4 * h));
      Var c = ops::mul(i, g);
      if (s > 0) c = ops::add(ops::mul(f, cprev), c);
      Var hc = ops::mul(o, ops::tanh(c));
      outs[t] = hc;
      hprev = hc;
      cprev = c;
    }
    return T == 1 ? outs[0] : ops::concat_rows(outs);
  }

  template <typename Self>
  static Var encode_impl(Self& self, Tape& tape, Var pooled, bool train, Rng* rng) {
    const std::size_t pw = self.pool_width();
    if (pooled.value().ndim() != 2 || pooled.cols() != pw)
      throw ShapeError("encode_light: pooled input " + shape_str(pooled.shape()) +
                       " does not have width " + std::to_string(pw));
    if (train && self.cfg_.dropout > 0.0 && !rng)
      throw ValueError("encode_light: training mode with dropout needs an rng");
    auto& P = self.encoder_;
    Rng dummy(0);
    Var x = ops::gelu(ops::add_bias(ops::matmul(pooled, tape.param(P.at("dense.W"))),
                                    tape.param(P.at("dense.b"))));
    x = ops::dropout(x, self.cfg_.dropout, rng ? *rng : dummy, train);
    if (!self.cfg_.use_bilstm) return x;
    for (std::size_t l = 0; l < self.cfg_.lstm_layers; ++l) {
      Var fw = lstm_direction(self, tape, x, l, true);
      Var bw = lstm_direction(self, tape, x, l, false);
      x = ops::concat_cols({fw, bw});
    }
    return x;
  }

  template <typename Self>
  static Var ic_impl(Self& self, Tape& tape, Var rep) {
    auto& H = self.heads_;
    Var u = self.cfg_.utterance_rep == UtteranceRep::cls ? ops::slice_rows(rep, 0, 1)
                                                         : ops::mean_rows(rep);
    return ops::add_bias(ops::matmul(u, tape.param(H.at("ic.W"))), tape.param(H.at("ic.b")));
  }

  template <typename Self>
  static Var emissions_impl(Self& self, Tape& tape, Var rep, std::size_t begin, std::size_t end) {
    auto& H = self.heads_;
    Var r = (begin == 0 && end == rep.rows()) ? rep : ops::slice_rows(rep, begin, end);
    return ops::add_bias(ops::matmul(r, tape.param(H.at("crf.W"))), tape.param(H.at("crf.b")));
  }

  template <typename Self>
  static LightOutputs forward_vars_impl(Self& self, Tape& tape, const std::vector<Var>& layers,
                                        bool train, Rng* rng) {
    if (layers.empty() || layers[0].rows() < 3)
      throw ShapeError("light encoder: expected [CLS] tokens [SEP] with at least one token");
    Var rep = encode_impl(self, tape, pool_impl(self, tape, layers), train, rng);
    return {ic_impl(self, tape, rep), emissions_impl(self, tape, rep, 1, rep.rows() - 1)};
  }

  template <typename Self>
  static LightOutputs forward_impl(Self& self, Tape& tape, const LayerActivations& acts,
                                   bool train, Rng* rng) {
    std::vector<Var> layers;
    layers.reserve(acts.per_layer.size());
    for (const auto& t : acts.per_layer) layers.push_back(tape.constant_ref(t));
    return forward_vars_impl(self, tape, layers, train, rng);
  }

  template <typename Self>
  static Var joint_impl(Self& self, Tape& tape, const LightOutputs& out, int gold_intent,
                        const std::vector<int>& gold_slots) {
    const auto ni = static_cast<int>(self.schema_.n_intents());
    const auto ns = static_cast<int>(self.schema_.n_slots());
    if (gold_intent < 0 || gold_intent >= ni)
      throw ValueError("joint_loss: intent label " + std::to_string(gold_intent) +
                       " outside [0, " + std::to_string(ni) + ")");
    for (int s : gold_slots)
      if (s < 0 || s >= ns)
        throw ValueError("joint_loss: slot label " + std::to_string(s) + " outside [0, " +
                         std::to_string(ns) + ")");
    if (gold_slots.size() != out.emissions.rows())
      throw ShapeError("joint_loss: " + std::to_string(gold_slots.size()) + " slot labels for " +
                       std::to_string(out.emissions.rows()) + " tokens");
    auto& H = self.heads_;
    Var ic = ops::cross_entropy(out.ic_logits, {gold_intent});
    Var sl = crf::nll(out.emissions, tape.param(H.at("crf.transitions")),
                      tape.param(H.at("crf.start")), tape.param(H.at("crf.stop")), gold_slots);
    return ops::add(ic, sl);
  }

  LightEncoderConfig cfg_;
  std::size_t n_layers_ = 0;
  std::size_t d_model_ = 0;
  DomainSchema schema_;
  ParameterStore encoder_;
  ParameterStore heads_;
};

// ---------------------------------------------------------------------------
// Inference

struct Prediction {
  std::string intent;
  std::vector<std::string> tags;
  std::vector<SlotSpan> slots;
};

/// "[CLS] tokens [SEP]" model input for a single utterance.
inline CLMExample utterance_input(const std::vector<std::string>& tokens, const Vocab& vocab) {
  CLMExample ex;
  ex.input_ids.push_back(Vocab::kCls);
  for (int id : vocab.encode(tokens)) ex.input_ids.push_back(id);
  ex.input_ids.push_back(Vocab::kSep);
  ex.type_ids.assign(ex.input_ids.size(), 0);
  ex.attention_mask.assign(ex.input_ids.size(), 1);
  ex.mlm_labels.assign(ex.input_ids.size(), ops::kIgnore);
  return ex;
}

inline LayerActivations utterance_activations(const Backbone& backbone, const Vocab& vocab,
                                              const std::vector<std::string>& tokens) {
  const auto ex = utterance_input(tokens, vocab);
  return backbone.encode(ex.input_ids, ex.type_ids, ex.attention_mask);
}

/// Decodes a label path to repaired BIO tags.
inline std::vector<std::string> path_to_tags(const std::vector<int>& path, const DomainSchema& schema) {
  std::vector<std::string> tags;
  tags.reserve(path.size());
  for (int y : path) tags.push_back(schema.slot_labels.at(static_cast<std::size_t>(y)));
  return repair_bio(std::move(tags));
}

inline Prediction predict_from_activations(const LightEncoder& light, const LayerActivations& acts) {
  Tape tape;
  const LightOutputs out = light.forward(tape, acts);
  const auto& logits = out.ic_logits.value();
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[best]) best = j;
  const auto dec = crf::viterbi(out.emissions.value(), light.crf_transitions(), light.crf_start(),
                                light.crf_stop());
  Prediction p;
  p.intent = light.schema().intents[best];
  p.tags = path_to_tags(dec.path, light.schema());
  p.slots = extract_spans(p.tags);
  return p;
}

/// Intent = argmax IC score; slots = Viterbi path decoded to BIO spans.
inline Prediction predict(const Backbone& backbone, const LightEncoder& light, const Vocab& vocab,
                          const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw ValueError("predict: empty utterance");
  return predict_from_activations(light, utterance_activations(backbone, vocab, tokens));
}

}  // namespace lslu
