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
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/backbone.hpp"
#include "lslu/clm_data.hpp"
#include "lslu/light_encoder.hpp"
#include "lslu/optim.hpp"
#include "lslu/random.hpp"

namespace lslu {

enum class Regime { clm, query_only, plain_mlm };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::clm: return "clm";
    case Regime::query_only: return "query_only";
    case Regime::plain_mlm: return "plain_mlm";
  }
  return "?";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "clm") return Regime::clm;
  if (s == "query_only") return Regime::query_only;
  if (s == "plain_mlm") return Regime::plain_mlm;
  throw ConfigError("unknown regime '" + s + "' (expected clm, query_only, plain_mlm)");
}

struct PretrainConfig {
  Regime regime = Regime::clm;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  MaskingPolicy masking{};  // policy of the regime's own examples
  MaskingPolicy plain_masking{MaskMode::standard};
  double plain_ratio = 1.0;  // clm only: plain examples per clm example

  static PretrainConfig defaults(Regime r) {
    PretrainConfig c;
    c.regime = r;
    c.masking.mode = r == Regime::clm ? MaskMode::mixed : MaskMode::standard;
    return c;
  }

  void validate() const {
    if (epochs == 0) throw ConfigError("pretrain: epochs must be positive");
    if (batch_size == 0) throw ConfigError("pretrain: batch_size must be positive");
    if (!(plain_ratio >= 0.0) || !std::isfinite(plain_ratio))
      throw ConfigError("pretrain: plain_ratio must be a finite non-negative number");
    if (!(adam.lr > 0.0)) throw ConfigError("pretrain: lr must be positive");
    masking.validate();
    plain_masking.validate();
  }
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;        // mean cross-entropy over masked positions
  double masked_acc = 0.0;  // fraction of masked positions predicted exactly
};

struct TrainingTrace {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
  double wall_seconds = 0.0;

  double initial_loss() const { return steps.empty() ? 0.0 : steps.front().loss; }
  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

/// "step\tloss\tmasked_acc" per line, full precision. Wall-clock is left out
/// so identical seeds give identical files.
inline void write_metrics(std::ostream& os, const TrainingTrace& trace) {
  os << "step\tloss\tmasked_acc\n";
  char buf[96];
  for (const auto& s : trace.steps) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", s.step, s.loss, s.masked_acc);
    os << buf;
  }
}

inline void save_metrics(const std::string& path, const TrainingTrace& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write metrics file " + path);
  write_metrics(os, trace);
  if (!os) throw IoError("write failed for " + path);
}

inline TrainingTrace read_metrics(std::istream& is) {
  TrainingTrace t;
  std::string line;
  if (!std::getline(is, line) || line != "step\tloss\tmasked_acc")
    throw IoError("metrics file: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    StepRecord r;
    if (!(ls >> r.step >> r.loss >> r.masked_acc)) throw IoError("metrics file: bad line '" + line + "'");
    t.steps.push_back(r);
  }
  return t;
}

/// Cross-entropy summed over labeled rows of full logits [T x V]. Rows whose
/// label is kIgnore do not enter the value at all.
inline Var masked_lm_loss(Var logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows())
    throw ShapeError("masked_lm_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  std::vector<int> rows, targets;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != ops::kIgnore) {
      rows.push_back(static_cast<int>(i));
      targets.push_back(labels[i]);
    }
  if (rows.empty()) throw ValueError("masked_lm_loss: no labeled positions");
  return ops::cross_entropy(ops::embedding(logits, rows, "masked rows"), targets);
}

namespace detail {

struct MaskedRows {
  std::vector<int> rows;
  std::vector<int> targets;
};

inline MaskedRows masked_rows(const CLMExample& ex) {
  MaskedRows m;
  for (std::size_t i = 0; i < ex.mlm_labels.size(); ++i)
    if (ex.mlm_labels[i] != ops::kIgnore) {
      m.rows.push_back(static_cast<int>(i));
      m.targets.push_back(ex.mlm_labels[i]);
    }
  return m;
}

inline std::size_t count_correct(const Tensor& logits, const std::vector<int>& targets) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const auto row = logits.row_span(r);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    if (static_cast<int>(best) == targets[r]) ++correct;
  }
  return correct;
}

/// Original (pre-masking) token at every position.
inline void count_tokens(const CLMExample& ex, std::vector<std::size_t>* usage) {
  if (!usage) return;
  for (std::size_t i = 0; i < ex.input_ids.size(); ++i) {
    const int id = ex.mlm_labels[i] != ops::kIgnore ? ex.mlm_labels[i] : ex.input_ids[i];
    if (static_cast<std::size_t>(id) >= usage->size()) usage->resize(static_cast<std::size_t>(id) + 1, 0);
    ++(*usage)[static_cast<std::size_t>(id)];
  }
}

/// Drop-last groups of `batch` indices.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b + batch <= n; b += batch) {
    std::vector<std::size_t> ids(batch);
    std::iota(ids.begin(), ids.end(), b);
    out.push_back(std::move(ids));
  }
  return out;
}

inline void check_vocab(const Backbone& backbone, const Vocab& vocab) {
  if (vocab.size() != backbone.config().vocab_size)
    throw ConfigError("vocab has " + std::to_string(vocab.size()) +
                      " entries but backbone vocab_size is " +
                      std::to_string(backbone.config().vocab_size));
}

}  // namespace detail

/// Examples of one pre-training epoch, already in step order and grouped.
struct EpochPlan {
  std::vector<std::vector<CLMExample>> batches;
};

/// Freshly masked, shuffled, drop-last batches for one epoch. For clm the
/// pair batches interleave with plain-text batches at `plain_ratio`.
inline EpochPlan plan_epoch(const std::vector<ConversationPair>& corpus, const Vocab& vocab,
                            const PretrainConfig& cfg, std::size_t max_positions, Rng& rng) {
  auto build = [&](auto&& builder, const MaskingPolicy& policy, std::size_t count) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    std::vector<CLMExample> ex;
    ex.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      ex.push_back(builder(corpus[order[i % order.size()]], vocab, policy, max_positions, rng));
    std::vector<std::vector<CLMExample>> batches;
    for (const auto& ids : detail::make_batches(ex.size(), cfg.batch_size)) {
      std::vector<CLMExample> b;
      for (auto i : ids) b.push_back(std::move(ex[i]));
      batches.push_back(std::move(b));
    }
    return batches;
  };
  auto clm = [](const ConversationPair& p, const Vocab& v, const MaskingPolicy& m, std::size_t mp,
                Rng& r) { return build_clm_example(p, v, m, mp, r); };
  auto query = [](const ConversationPair& p, const Vocab& v, const MaskingPolicy& m,
                  std::size_t mp, Rng& r) { return build_query_only_example(p, v, m, mp, r); };
  auto plain = [](const ConversationPair& p, const Vocab& v, const MaskingPolicy& m,
                  std::size_t mp, Rng& r) { return build_plain_example(p, v, m, mp, r); };

  EpochPlan plan;
  switch (cfg.regime) {
    case Regime::query_only:
      plan.batches = build(query, cfg.masking, corpus.size());
      break;
    case Regime::plain_mlm:
      plan.batches = build(plain, cfg.masking, corpus.size());
      break;
    case Regime::clm: {
      auto a = build(clm, cfg.masking, corpus.size());
      const auto n_plain =
          static_cast<std::size_t>(std::llround(cfg.plain_ratio * static_cast<double>(corpus.size())));
      auto b = n_plain ? build(plain, cfg.plain_masking, n_plain)
                       : std::vector<std::vector<CLMExample>>{};
      // Merge by fractional position so the two streams stay evenly spread.
      std::size_t i = 0, j = 0;
      while (i < a.size() || j < b.size()) {
        const bool take_a =
            j >= b.size() ||
            (i < a.size() && (2.0 * static_cast<double>(i) + 1.0) * static_cast<double>(b.size()) <=
                                 (2.0 * static_cast<double>(j) + 1.0) * static_cast<double>(a.size()));
        plan.batches.push_back(std::move(take_a ? a[i++] : b[j++]));
      }
      break;
    }
  }
  return plan;
}

struct PretrainOptions {
  std::vector<std::size_t>* token_usage = nullptr;  // per-id count of consumed tokens
  std::function<void(const StepRecord&)> on_step;
};

/// MLM training of every backbone parameter (tied head included). The
/// backbone is updated in place.
inline TrainingTrace pretrain(Backbone& backbone, const std::vector<ConversationPair>& corpus,
                              const Vocab& vocab, const PretrainConfig& cfg,
                              const PretrainOptions& opts = {}) {
  if (corpus.empty()) throw ValueError("pretrain: empty corpus");
  cfg.validate();
  detail::check_vocab(backbone, vocab);
  backbone.unfreeze();
  const auto t0 = std::chrono::steady_clock::now();
  Rng data_rng(derive_seed(cfg.seed, 11));
  Rng drop_rng(derive_seed(cfg.seed, 12));
  Adam adam(cfg.adam);
  TrainingTrace trace;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto plan = plan_epoch(corpus, vocab, cfg, backbone.config().max_positions, data_rng);
    double ep_loss = 0.0;
    std::size_t ep_masked = 0, ep_correct = 0;
    for (auto& batch : plan.batches) {
      Tape tape;
      std::vector<Var> losses;
      std::size_t masked = 0, correct = 0;
      for (const auto& ex : batch) {
        detail::count_tokens(ex, opts.token_usage);
        const auto m = detail::masked_rows(ex);
        if (m.rows.empty()) continue;
        auto layers = backbone.encode(tape, ex.input_ids, ex.type_ids, ex.attention_mask, true, &drop_rng);
        Var logits = backbone.mlm_logits(tape, ops::embedding(layers.back(), m.rows, "masked rows"));
        correct += detail::count_correct(logits.value(), m.targets);
        losses.push_back(ops::cross_entropy(logits, m.targets));
        masked += m.rows.size();
      }
      if (masked == 0) continue;
      Var total = losses.size() == 1 ? losses[0] : ops::sum(ops::concat_cols(losses));
      Var loss = ops::scale(total, 1.0 / static_cast<double>(masked));
      const double lv = loss.value().item();
      if (!std::isfinite(lv))
        throw NumericError("pretrain: non-finite loss at step " + std::to_string(step));
      tape.backward(loss);
      adam.step(backbone.params());
      const StepRecord rec{step, lv, static_cast<double>(correct) / static_cast<double>(masked)};
      trace.steps.push_back(rec);
      if (opts.on_step) opts.on_step(rec);
      ep_loss += lv * static_cast<double>(masked);
      ep_masked += masked;
      ep_correct += correct;
      ++step;
    }
    trace.epoch_loss.push_back(ep_masked ? ep_loss / static_cast<double>(ep_masked) : 0.0);
    trace.epoch_accuracy.push_back(
        ep_masked ? static_cast<double>(ep_correct) / static_cast<double>(ep_masked) : 0.0);
  }
  if (trace.steps.empty())
    throw ValueError("pretrain: corpus too small for one batch of " + std::to_string(cfg.batch_size));
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

struct MlmEval {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::size_t masked = 0;
};

/// Scores any model given as a function from an example to full logits
/// [T x V]. Examples without masked positions contribute nothing.
inline MlmEval evaluate_mlm(const std::function<Tensor(const CLMExample&)>& logits_fn,
                            const std::vector<CLMExample>& heldout) {
  MlmEval r;
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& ex : heldout) {
    const auto m = detail::masked_rows(ex);
    if (m.rows.empty()) continue;
    const Tensor logits = logits_fn(ex);
    if (logits.rows() != ex.size())
      throw ShapeError("evaluate_mlm: logits have " + std::to_string(logits.rows()) +
                       " rows for " + std::to_string(ex.size()) + " positions");
    for (std::size_t k = 0; k < m.rows.size(); ++k) {
      const auto row = logits.row_span(static_cast<std::size_t>(m.rows[k]));
      const double lse = log_sum_exp(row);
      loss += lse - row[static_cast<std::size_t>(m.targets[k])];
      std::size_t best = 0;
      for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
      if (static_cast<int>(best) == m.targets[k]) ++correct;
    }
    r.masked += m.rows.size();
  }
  if (r.masked) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.masked);
    r.mean_loss = loss / static_cast<double>(r.masked);
  }
  return r;
}

inline MlmEval evaluate_mlm(const Backbone& backbone, const std::vector<CLMExample>& heldout) {
  return evaluate_mlm(
      [&backbone](const CLMExample& ex) {
        Tape tape;
        auto layers = backbone.encode(tape, ex.input_ids, ex.type_ids, ex.attention_mask);
        return backbone.mlm_logits(tape, layers.back()).value();
      },
      heldout);
}

// ---------------------------------------------------------------------------
// Light-encoder MLM initialization

struct LightInitConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  MaskingPolicy masking{MaskMode::standard};

  void validate() const {
    if (epochs == 0) throw ConfigError("init-light: epochs must be positive");
    if (batch_size == 0) throw ConfigError("init-light: batch_size must be positive");
    masking.validate();
  }
};

/// Trains the light encoder's pooling/dense/BiLSTM weights to predict masked
/// tokens through a temporary linear head over its token outputs. The
/// backbone must be frozen and is only read. The head is dropped on return.
inline TrainingTrace init_light_encoder_mlm(const Backbone& backbone, LightEncoder& light,
                                            const std::vector<std::vector<std::string>>& texts,
                                            const Vocab& vocab, const LightInitConfig& cfg) {
  if (!backbone.frozen()) throw ConfigError("init-light: backbone is not frozen");
  if (texts.empty()) throw ValueError("init-light: empty corpus");
  cfg.validate();
  detail::check_vocab(backbone, vocab);
  if (light.n_layers() != backbone.config().n_layers || light.d_model() != backbone.config().d_model)
    throw ConfigError("init-light: light encoder geometry does not match the backbone");
  const auto t0 = std::chrono::steady_clock::now();
  Rng data_rng(derive_seed(cfg.seed, 21));
  Rng drop_rng(derive_seed(cfg.seed, 22));
  Rng init_rng(derive_seed(cfg.seed, 23));

  ParameterStore head;
  {
    const std::size_t rw = light.config().rep_width(), V = vocab.size();
    const double a = std::sqrt(6.0 / static_cast<double>(rw + V));
    Tensor W({rw, V});
    for (auto& v : W.vec()) v = uniform(init_rng, -a, a);
    head.add("mlm_init.W", std::move(W));
    head.add("mlm_init.b", Tensor({V}, 0.0));
  }
  Adam adam(cfg.adam);
  TrainingTrace trace;
  std::size_t step = 0;
  const std::size_t maxpos = backbone.config().max_positions;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(texts.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, data_rng);
    double ep_loss = 0.0;
    std::size_t ep_masked = 0, ep_correct = 0;
    for (const auto& ids : detail::make_batches(order.size(), cfg.batch_size)) {
      Tape tape;
      std::vector<Var> losses;
      std::size_t masked = 0, correct = 0;
      for (auto k : ids) {
        const auto ex = apply_masking(build_single_sequence(texts[order[k]], {}, vocab, maxpos),
                                      cfg.masking, vocab, data_rng);
        const auto m = detail::masked_rows(ex);
        if (m.rows.empty()) continue;
        auto acts = backbone.encode(ex.input_ids, ex.type_ids, ex.attention_mask);
        std::vector<Var> layers;
        for (auto& t : acts.per_layer) layers.push_back(tape.constant(std::move(t)));
        Var rep = light.encode(tape, light.pool(tape, layers), true, &drop_rng);
        Var h = ops::embedding(rep, m.rows, "masked rows");
        Var logits = ops::add_bias(ops::matmul(h, tape.param(head.at("mlm_init.W"))),
                                   tape.param(head.at("mlm_init.b")));
        correct += detail::count_correct(logits.value(), m.targets);
        losses.push_back(ops::cross_entropy(logits, m.targets));
        masked += m.rows.size();
      }
      if (masked == 0) continue;
      Var total = losses.size() == 1 ? losses[0] : ops::sum(ops::concat_cols(losses));
      Var loss = ops::scale(total, 1.0 / static_cast<double>(masked));
      const double lv = loss.value().item();
      if (!std::isfinite(lv))
        throw NumericError("init-light: non-finite loss at step " + std::to_string(step));
      tape.backward(loss);
      adam.step({&light.encoder(), &head});
      trace.steps.push_back({step, lv, static_cast<double>(correct) / static_cast<double>(masked)});
      ep_loss += lv * static_cast<double>(masked);
      ep_masked += masked;
      ep_correct += correct;
      ++step;
    }
    trace.epoch_loss.push_back(ep_masked ? ep_loss / static_cast<double>(ep_masked) : 0.0);
    trace.epoch_accuracy.push_back(
        ep_masked ? static_cast<double>(ep_correct) / static_cast<double>(ep_masked) : 0.0);
  }
  if (trace.steps.empty())
    throw ValueError("init-light: corpus too small for one batch of " + std::to_string(cfg.batch_size));
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

}  // namespace lslu
