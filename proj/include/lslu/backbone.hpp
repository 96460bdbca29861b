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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/random.hpp"

namespace lslu {

struct BackboneConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t vocab_size = 0;
  std::size_t max_positions = 64;
  std::size_t n_type_ids = 2;
  double dropout = 0.1;

  /// BERT-base geometry with the uncased WordPiece vocabulary size.
  static BackboneConfig paper() {
    return {12, 768, 12, 3072, 30522, 512, 2, 0.1};
  }
  static BackboneConfig toy(std::size_t vocab_size, std::size_t max_positions = 64) {
    return {4, 64, 4, 256, vocab_size, max_positions, 2, 0.1};
  }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("backbone config: " + msg);
    };
    need(n_layers > 0, "n_layers must be positive");
    need(d_model > 0 && n_heads > 0, "d_model and n_heads must be positive");
    need(d_model % n_heads == 0, "d_model (" + std::to_string(d_model) +
                                     ") not divisible by n_heads (" +
                                     std::to_string(n_heads) + ")");
    need(d_ff > 0, "d_ff must be positive");
    need(vocab_size > 0, "vocab_size must be positive");
    need(max_positions > 0, "max_positions must be positive");
    need(n_type_ids == 2, "n_type_ids must be 2");
    need(dropout >= 0.0 && dropout < 1.0, "dropout outside [0, 1)");
  }

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

/// Outputs of the transformer layers (embedding output excluded).
struct LayerActivations {
  std::vector<Tensor> per_layer;  // n_layers x [seq_len x d_model]
  std::vector<std::uint8_t> attention_mask;

  std::size_t seq_len() const { return attention_mask.size(); }
};

/// Post-LN bidirectional transformer encoder with learned positions, binary
/// type embeddings, and an MLM head tied to the token embedding table.
class Backbone {
 public:
  Backbone() = default;

  explicit Backbone(const BackboneConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.d_model;
    auto normal_init = [&rng](Shape s) {
      Tensor t(std::move(s));
      for (auto& v : t.vec()) v = normal(rng, 0.0, 0.02);
      return t;
    };
    params_.add("emb.token", normal_init({cfg_.vocab_size, d}));
    params_.add("emb.position", normal_init({cfg_.max_positions, d}));
    params_.add("emb.type", normal_init({cfg_.n_type_ids, d}));
    params_.add("emb.ln.gamma", Tensor({d}, 1.0));
    params_.add("emb.ln.beta", Tensor({d}, 0.0));
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      for (const char* m : {"q", "k", "v", "o"}) {
        params_.add(p + "attn." + m + ".W", normal_init({d, d}));
        params_.add(p + "attn." + m + ".b", Tensor({d}, 0.0));
      }
      params_.add(p + "ln1.gamma", Tensor({d}, 1.0));
      params_.add(p + "ln1.beta", Tensor({d}, 0.0));
      params_.add(p + "ffn.W1", normal_init({d, cfg_.d_ff}));
      params_.add(p + "ffn.b1", Tensor({cfg_.d_ff}, 0.0));
      params_.add(p + "ffn.W2", normal_init({cfg_.d_ff, d}));
      params_.add(p + "ffn.b2", Tensor({d}, 0.0));
      params_.add(p + "ln2.gamma", Tensor({d}, 1.0));
      params_.add(p + "ln2.beta", Tensor({d}, 0.0));
    }
    params_.add("mlm.bias", Tensor({cfg_.vocab_size}, 0.0));
  }

  /// Wraps existing parameters (checkpoint loading). Names and shapes must
  /// match what the constructor would create for `cfg`.
  static Backbone from_parameters(const BackboneConfig& cfg, ParameterStore params) {
    Backbone reference(cfg, 0);
    if (reference.params_.size() != params.size())
      throw ConfigError("backbone: expected " + std::to_string(reference.params_.size()) +
                        " tensors, got " + std::to_string(params.size()));
    for (const auto& p : reference.params_) {
      const auto* q = params.find(p.name);
      if (!q) throw ConfigError("backbone: missing tensor '" + p.name + "'");
      if (q->value.shape() != p.value.shape())
        throw ShapeError("backbone: tensor '" + p.name + "' has shape " +
                         shape_str(q->value.shape()) + ", config expects " +
                         shape_str(p.value.shape()));
    }
    Backbone b;
    b.cfg_ = cfg;
    b.params_ = std::move(params);
    return b;
  }

  const BackboneConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  void freeze() { params_.set_trainable(false); }
  void unfreeze() { params_.set_trainable(true); }
  bool frozen() const { return params_.all_frozen(); }
  std::uint64_t checksum() const { return params_.checksum(); }

  /// LayerNorm(token + position + type) -> [T x d_model].
  Var embed(Tape& tape, const std::vector<int>& token_ids,
            const std::vector<int>& type_ids, const std::vector<int>& positions) {
    return embed_impl(*this, tape, token_ids, type_ids, positions);
  }
  Var embed(Tape& tape, const std::vector<int>& token_ids,
            const std::vector<int>& type_ids,
            const std::vector<int>& positions) const {
    return embed_impl(*this, tape, token_ids, type_ids, positions);
  }

  /// Per-layer outputs as tape variables. Key positions with mask 0 receive
  /// zero attention weight. The const overload records weights as constants.
  std::vector<Var> encode(Tape& tape, const std::vector<int>& token_ids,
                          const std::vector<int>& type_ids,
                          const std::vector<std::uint8_t>& mask, bool train = false,
                          Rng* rng = nullptr) {
    return encode_impl(*this, tape, token_ids, type_ids, mask, train, rng);
  }
  std::vector<Var> encode(Tape& tape, const std::vector<int>& token_ids,
                          const std::vector<int>& type_ids,
                          const std::vector<std::uint8_t>& mask) const {
    return encode_impl(*this, tape, token_ids, type_ids, mask, false, nullptr);
  }

  /// Inference-only forward pass producing plain tensors.
  LayerActivations encode(const std::vector<int>& token_ids,
                          const std::vector<int>& type_ids,
                          const std::vector<std::uint8_t>& mask) const {
    Tape tape;
    auto vars = encode(tape, token_ids, type_ids, mask);
    LayerActivations acts;
    acts.attention_mask = mask;
    for (const auto& v : vars) acts.per_layer.push_back(v.value());
    return acts;
  }

  /// hidden [T x d_model] -> vocabulary scores [T x vocab_size].
  Var mlm_logits(Tape& tape, Var hidden) { return mlm_impl(*this, tape, hidden); }
  Var mlm_logits(Tape& tape, Var hidden) const { return mlm_impl(*this, tape, hidden); }

 private:
  template <typename Self>
  static Var embed_impl(Self& self, Tape& tape, const std::vector<int>& token_ids,
                        const std::vector<int>& type_ids,
                        const std::vector<int>& positions) {
    const auto T = token_ids.size();
    if (T == 0) throw ShapeError("embed: empty sequence");
    if (type_ids.size() != T || positions.size() != T)
      throw ShapeError("embed: lengths differ (tokens " + std::to_string(T) +
                       ", types " + std::to_string(type_ids.size()) +
                       ", positions " + std::to_string(positions.size()) + ")");
    auto& P = self.params_;
    Var tok = ops::embedding(tape.param(P.at("emb.token")), token_ids, "embed: token");
    Var pos = ops::embedding(tape.param(P.at("emb.position")), positions, "embed: position");
    Var typ = ops::embedding(tape.param(P.at("emb.type")), type_ids, "embed: type");
    Var sum = ops::add(ops::add(tok, pos), typ);
    return ops::layer_norm(sum, tape.param(P.at("emb.ln.gamma")),
                           tape.param(P.at("emb.ln.beta")));
  }

  template <typename Self>
  static std::vector<Var> encode_impl(Self& self, Tape& tape,
                                      const std::vector<int>& token_ids,
                                      const std::vector<int>& type_ids,
                                      const std::vector<std::uint8_t>& mask,
                                      bool train, Rng* rng) {
    const auto& cfg = self.cfg_;
    const std::size_t T = token_ids.size();
    if (T > cfg.max_positions)
      throw ShapeError("encode: sequence length " + std::to_string(T) +
                       " exceeds max_positions " + std::to_string(cfg.max_positions));
    if (mask.size() != T)
      throw ShapeError("encode: mask length " + std::to_string(mask.size()) +
                       " vs " + std::to_string(T) + " tokens");
    if (train && cfg.dropout > 0.0 && !rng)
      throw ValueError("encode: training mode with dropout needs an rng");
    std::vector<int> positions(T);
    for (std::size_t i = 0; i < T; ++i) positions[i] = static_cast<int>(i);
    Var x = embed_impl(self, tape, token_ids, type_ids, positions);

    auto& P = self.params_;
    const std::size_t d = cfg.d_model, H = cfg.n_heads, dh = d / H;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    Rng dummy(0);
    Rng& r = rng ? *rng : dummy;
    auto linear = [&](Var in, const std::string& w, const std::string& b) {
      return ops::add_bias(ops::matmul(in, tape.param(P.at(w))), tape.param(P.at(b)));
    };

    std::vector<Var> outs;
    outs.reserve(cfg.n_layers);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Var q = linear(x, p + "attn.q.W", p + "attn.q.b");
      Var k = linear(x, p + "attn.k.W", p + "attn.k.b");
      Var v = linear(x, p + "attn.v.W", p + "attn.v.b");
      std::vector<Var> heads;
      heads.reserve(H);
      for (std::size_t h = 0; h < H; ++h) {
        Var qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
        Var att = ops::softmax_rows(ops::scale(ops::matmul_nt(qh, kh), inv_sqrt), &mask);
        heads.push_back(ops::matmul(att, vh));
      }
      Var ctx = H == 1 ? heads[0] : ops::concat_cols(heads);
      Var attn = ops::dropout(linear(ctx, p + "attn.o.W", p + "attn.o.b"),
                              cfg.dropout, r, train);
      x = ops::layer_norm(ops::add(x, attn), tape.param(P.at(p + "ln1.gamma")),
                          tape.param(P.at(p + "ln1.beta")));
      Var ff = ops::gelu(linear(x, p + "ffn.W1", p + "ffn.b1"));
      ff = ops::dropout(linear(ff, p + "ffn.W2", p + "ffn.b2"), cfg.dropout, r, train);
      x = ops::layer_norm(ops::add(x, ff), tape.param(P.at(p + "ln2.gamma")),
                          tape.param(P.at(p + "ln2.beta")));
      outs.push_back(x);
    }
    return outs;
  }

  template <typename Self>
  static Var mlm_impl(Self& self, Tape& tape, Var hidden) {
    if (hidden.value().ndim() != 2 || hidden.cols() != self.cfg_.d_model)
      throw ShapeError("mlm_logits: hidden " + shape_str(hidden.shape()) +
                       " does not match head input width " +
                       std::to_string(self.cfg_.d_model));
    auto& P = self.params_;
    return ops::add_bias(ops::matmul_nt(hidden, tape.param(P.at("emb.token"))),
                         tape.param(P.at("mlm.bias")));
  }

  BackboneConfig cfg_;
  ParameterStore params_;
};

}  // namespace lslu
