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
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lslu/backbone.hpp"
#include "lslu/bio.hpp"
#include "lslu/error.hpp"
#include "lslu/light_encoder.hpp"

namespace lslu {

// ---------------------------------------------------------------------------
// Intent classification

struct IcMetrics {
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, double> per_class_f1;
};

/// Macro F1 averages over every label seen in either sequence.
inline IcMetrics ic_metrics(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.size() != gold.size())
    throw ValueError("ic_metrics: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(gold.size()) + " gold labels");
  if (gold.empty()) throw ValueError("ic_metrics: no examples");
  std::map<std::string, std::size_t> tp, fp, fn;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tp[gold[i]];
    tp[pred[i]];
    if (pred[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    } else {
      ++fp[pred[i]];
      ++fn[gold[i]];
    }
  }
  IcMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  // single-label: every error is one FP and one FN
  const double P = m.accuracy, R = m.accuracy;
  m.micro_f1 = P + R > 0.0 ? 2.0 * P * R / (P + R) : 0.0;
  double sum = 0.0;
  for (const auto& [label, t] : tp) {
    const double denom = 2.0 * static_cast<double>(t) + static_cast<double>(fp[label] + fn[label]);
    const double f1 = denom > 0.0 ? 2.0 * static_cast<double>(t) / denom : 0.0;
    m.per_class_f1[label] = f1;
    sum += f1;
  }
  m.macro_f1 = sum / static_cast<double>(tp.size());
  return m;
}

// ---------------------------------------------------------------------------
// Slot labeling

struct SpanF1 {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

/// Exact-match span F1 over BIO sequences. A ratio with an empty
/// denominator counts as 1, so two empty span sets score F1 = 1.
inline SpanF1 sl_span_f1(const std::vector<std::vector<std::string>>& pred,
                         const std::vector<std::vector<std::string>>& gold) {
  if (pred.size() != gold.size())
    throw ValueError("sl_span_f1: " + std::to_string(pred.size()) + " predicted sequences for " +
                     std::to_string(gold.size()) + " gold sequences");
  SpanF1 s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i].size() != gold[i].size())
      throw ValueError("sl_span_f1: sequence " + std::to_string(i) + " has " +
                       std::to_string(pred[i].size()) + " predicted tags for " +
                       std::to_string(gold[i].size()) + " gold tags");
    const auto ps = extract_spans(pred[i]);
    const auto gs = extract_spans(gold[i]);
    const std::set<SlotSpan> gset(gs.begin(), gs.end());
    for (const auto& p : ps) s.true_positives += gset.count(p);
    s.predicted += ps.size();
    s.gold += gs.size();
  }
  const double tp = static_cast<double>(s.true_positives);
  s.precision = s.predicted ? tp / static_cast<double>(s.predicted) : 1.0;
  s.recall = s.gold ? tp / static_cast<double>(s.gold) : 1.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

/// (score - baseline) / baseline, in percent.
inline double relative_diff(double score, double baseline) {
  if (!(baseline > 0.0)) throw ValueError("relative_diff: baseline must be positive");
  return (score - baseline) / baseline * 100.0;
}

// ---------------------------------------------------------------------------
// Parameter accounting

/// Backbone scalars, with the MLM head tied to the token table (bias only).
inline std::size_t backbone_param_count(const BackboneConfig& c) {
  const std::size_t d = c.d_model, f = c.d_ff;
  const std::size_t emb = (c.vocab_size + c.max_positions + c.n_type_ids) * d + 2 * d;
  const std::size_t layer = 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d;
  return emb + c.n_layers * layer + c.vocab_size;
}

struct LightParamBreakdown {
  std::size_t mixer = 0;
  std::size_t dense = 0;
  std::size_t lstm = 0;
  std::size_t ic_head = 0;
  std::size_t crf = 0;
  std::size_t total() const { return mixer + dense + lstm + ic_head + crf; }
};

inline LightParamBreakdown light_param_breakdown(const LightEncoderConfig& lc, std::size_t n_layers,
                                                 std::size_t d_model, std::size_t n_intents,
                                                 std::size_t n_slots) {
  LightParamBreakdown b;
  if (lc.pooling == Pooling::learned_linear) b.mixer = n_layers + 1;
  const std::size_t pw = lc.pool_width(n_layers, d_model), dw = lc.dense_width();
  b.dense = pw * dw + dw;
  if (lc.use_bilstm) {
    const std::size_t h = lc.lstm_hidden;
    for (std::size_t l = 0; l < lc.lstm_layers; ++l) {
      const std::size_t in = l == 0 ? dw : 2 * h;
      b.lstm += 2 * (4 * h * (in + h + 1));
    }
  }
  const std::size_t rw = lc.rep_width(), K = n_slots;
  b.ic_head = rw * n_intents + n_intents;
  b.crf = rw * K + K + K * K + 2 * K;
  return b;
}

enum class FinetuneMode { shared_backbone, full };

struct ParamReport {
  std::size_t backbone_params = 0;
  std::size_t light_params = 0;
  std::size_t trained_per_task = 0;
  double per_task_fraction = 0.0;  // trained per task / single-task model size
  std::size_t k_tasks = 1;
  double multiplier = 1.0;  // k-task storage relative to one backbone
  FinetuneMode mode = FinetuneMode::shared_backbone;
};

/// Analytic counts from configuration only; nothing is allocated.
inline ParamReport count_parameters(const BackboneConfig& bc, const LightEncoderConfig& lc,
                                    const DomainSchema& schema, std::size_t k_tasks = 1,
                                    FinetuneMode mode = FinetuneMode::shared_backbone) {
  if (k_tasks == 0) throw ConfigError("count_parameters: k_tasks must be positive");
  ParamReport r;
  r.mode = mode;
  r.k_tasks = k_tasks;
  r.backbone_params = backbone_param_count(bc);
  r.light_params =
      light_param_breakdown(lc, bc.n_layers, bc.d_model, schema.n_intents(), schema.n_slots()).total();
  const double model = static_cast<double>(r.backbone_params + r.light_params);
  if (mode == FinetuneMode::full) {
    r.trained_per_task = r.backbone_params + r.light_params;
    r.per_task_fraction = 1.0;
    r.multiplier = static_cast<double>(k_tasks);
  } else {
    r.trained_per_task = r.light_params;
    r.per_task_fraction = static_cast<double>(r.light_params) / model;
    r.multiplier = 1.0 + static_cast<double>(k_tasks) * r.per_task_fraction;
  }
  return r;
}

/// Stand-in schema with the given label inventory sizes.
inline DomainSchema synthetic_schema(std::size_t n_intents, std::size_t n_slot_types) {
  std::vector<std::string> intents, types;
  for (std::size_t i = 0; i < n_intents; ++i) intents.push_back("intent" + std::to_string(i));
  for (std::size_t i = 0; i < n_slot_types; ++i) types.push_back("slot" + std::to_string(i));
  return DomainSchema::from_types("synthetic", std::move(intents), types);
}

// ---------------------------------------------------------------------------
// Report rendering

struct DomainScore {
  double ic = 0.0;  // [0, 1]
  double sl = 0.0;  // [0, 1]
};

struct MetricsRow {
  std::string model;
  std::vector<DomainScore> scores;  // one per report domain
};

struct ParamRow {
  std::string model;
  ParamReport report;
};

struct ReportSpec {
  std::vector<std::string> domains;
  std::vector<MetricsRow> rows;
  std::optional<std::size_t> baseline;  // rows except this one show relative diffs
  std::vector<ParamRow> params;
};

namespace detail {
inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
inline std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}
inline std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}
}  // namespace detail

/// Fixed-width text table: IC/SL scores per domain (percent, or signed
/// relative difference against the baseline row), then parameter columns.
inline std::string render_report(const ReportSpec& spec) {
  using detail::fmt;
  using detail::pad_left;
  using detail::pad_right;
  std::size_t name_w = 24;
  for (const auto& r : spec.rows) name_w = std::max(name_w, r.model.size() + 2);
  for (const auto& p : spec.params) name_w = std::max(name_w, p.model.size() + 2);
  if (spec.baseline && *spec.baseline >= spec.rows.size())
    throw ValueError("render_report: baseline row out of range");
  std::vector<std::string> cols;
  for (const auto& d : spec.domains) {
    cols.push_back(d + " IC");
    cols.push_back(d + " SL");
  }
  std::size_t col_w = 12;
  for (const auto& c : cols) col_w = std::max(col_w, c.size() + 2);

  std::ostringstream os;
  const bool scores = !spec.domains.empty() || !spec.rows.empty() || spec.params.empty();
  if (scores) {
    os << pad_right("Model", name_w);
    for (const auto& c : cols) os << pad_left(c, col_w);
    os << '\n' << std::string(name_w + col_w * cols.size(), '-') << '\n';
  }
  for (std::size_t i = 0; i < spec.rows.size(); ++i) {
    const auto& row = spec.rows[i];
    if (row.scores.size() != spec.domains.size())
      throw ValueError("render_report: row '" + row.model + "' has " +
                       std::to_string(row.scores.size()) + " domain scores for " +
                       std::to_string(spec.domains.size()) + " domains");
    os << pad_right(row.model, name_w);
    const bool relative = spec.baseline && *spec.baseline != i;
    for (std::size_t d = 0; d < row.scores.size(); ++d) {
      for (int which = 0; which < 2; ++which) {
        const double v = which == 0 ? row.scores[d].ic : row.scores[d].sl;
        std::string cell;
        if (relative) {
          const auto& b = spec.rows[*spec.baseline].scores[d];
          cell = fmt("%+.2f", relative_diff(v, which == 0 ? b.ic : b.sl));
        } else {
          cell = fmt("%.2f", v * 100.0);
        }
        os << pad_left(cell, col_w);
      }
    }
    os << '\n';
  }
  if (!spec.params.empty()) {
    if (scores) os << '\n';
    os << pad_right("Model", name_w) << pad_left("Total params", 16)
       << pad_left("Trained per task", 20) << '\n'
       << std::string(name_w + 36, '-') << '\n';
    for (const auto& p : spec.params) {
      os << pad_right(p.model, name_w) << pad_left(fmt("%.2fx", p.report.multiplier), 16)
         << pad_left(fmt("%.1f%%", p.report.per_task_fraction * 100.0), 20) << '\n';
    }
  }
  return os.str();
}

}  // namespace lslu
