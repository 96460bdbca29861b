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
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/error.hpp"
#include "lslu/random.hpp"

namespace lslu {

inline std::string fold_case(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

/// Closed whitespace-token vocabulary with fixed reserved ids.
class Vocab {
 public:
  static constexpr int kPad = 0, kUnk = 1, kCls = 2, kSep = 3, kMask = 4;
  static constexpr int kNumReserved = 5;

  Vocab() {
    for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) push(t);
  }

  template <typename Range>
  static Vocab from_tokens(const Range& tokens) {
    Vocab v;
    for (const auto& t : tokens) v.add(t);
    return v;
  }

  int add(const std::string& token) {
    if (auto f = find(token); f >= 0) return f;
    return push(fold_case(token));
  }

  int id(const std::string& token) const {
    const int f = find(token);
    return f < 0 ? kUnk : f;
  }

  bool contains(const std::string& token) const { return find(token) >= 0; }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw ValueError("vocab: id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  static bool is_special(int id) { return id >= 0 && id < kNumReserved; }

  /// Space-separated non-reserved tokens (config snapshot form).
  std::string serialize() const {
    std::vector<std::string> v(tokens_.begin() + kNumReserved, tokens_.end());
    return join(v);
  }
  static Vocab deserialize(const std::string& s) { return from_tokens(split_ws(s)); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  // reserved forms are upper case, so try the surface form first
  int find(const std::string& token) const {
    if (auto it = ids_.find(token); it != ids_.end()) return it->second;
    if (auto it = ids_.find(fold_case(token)); it != ids_.end()) return it->second;
    return -1;
  }

  int push(const std::string& t) {
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
    ids_.emplace(t, id);
    return id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Half-open token span [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

inline void validate_spans(const std::vector<Span>& spans, std::size_t n, const char* what) {
  std::vector<Span> s = spans;
  std::sort(s.begin(), s.end(), [](const Span& a, const Span& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].start >= s[i].end || s[i].end > n)
      throw ValueError(std::string(what) + ": span " + std::to_string(s[i].start) + "-" +
                       std::to_string(s[i].end) + " invalid for " + std::to_string(n) +
                       " tokens");
    if (i && s[i].start < s[i - 1].end)
      throw ValueError(std::string(what) + ": overlapping spans");
  }
}

struct ConversationPair {
  std::vector<std::string> query;
  std::vector<std::string> response;
  std::vector<Span> query_entities;
  std::vector<Span> response_entities;

  void validate() const {
    validate_spans(query_entities, query.size(), "query entities");
    validate_spans(response_entities, response.size(), "response entities");
  }
};

enum class MaskMode { entities_only, standard, mixed };

struct MaskingPolicy {
  MaskMode mode = MaskMode::mixed;
  double mask_rate = 0.15;
  double p_mask_token = 0.8;
  double p_random_token = 0.1;
  double p_keep = 0.1;
  /// mixed mode: probability that an entity span is selected as a whole.
  double whole_span_prob = 0.5;

  void validate() const {
    if (!(mask_rate > 0.0 && mask_rate <= 1.0))
      throw ConfigError("masking: mask_rate must be in (0, 1]");
    if (p_mask_token < 0 || p_random_token < 0 || p_keep < 0 ||
        std::abs(p_mask_token + p_random_token + p_keep - 1.0) > 1e-9)
      throw ConfigError("masking: replace probabilities must be non-negative and sum to 1");
    if (!(whole_span_prob >= 0.0 && whole_span_prob <= 1.0))
      throw ConfigError("masking: whole_span_prob outside [0, 1]");
  }
};

inline MaskMode parse_mask_mode(const std::string& s) {
  if (s == "entities_only") return MaskMode::entities_only;
  if (s == "standard") return MaskMode::standard;
  if (s == "mixed") return MaskMode::mixed;
  throw ConfigError("masking: unknown mode '" + s + "'");
}

inline std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::entities_only: return "entities_only";
    case MaskMode::standard: return "standard";
    case MaskMode::mixed: return "mixed";
  }
  return "?";
}

struct PairSequence {
  std::vector<int> input_ids;
  std::vector<int> type_ids;
  std::vector<Span> entity_spans;  // offsets into input_ids

  std::vector<std::size_t> entity_positions() const {
    std::vector<std::size_t> out;
    for (const auto& s : entity_spans)
      for (std::size_t i = s.start; i < s.end; ++i) out.push_back(i);
    return out;
  }
};

struct CLMExample {
  std::vector<int> input_ids;
  std::vector<int> type_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<int> mlm_labels;  // ops::kIgnore where not selected

  std::size_t size() const { return input_ids.size(); }
  std::size_t masked_count() const {
    return static_cast<std::size_t>(
        std::count_if(mlm_labels.begin(), mlm_labels.end(), [](int l) { return l != ops::kIgnore; }));
  }
};

struct MaskingStats {
  std::size_t examples = 0;
  std::size_t zero_mask_examples = 0;
  std::size_t selected = 0;
  std::size_t replaced_mask = 0;
  std::size_t replaced_random = 0;
  std::size_t kept = 0;
};

/// [CLS] query [SEP] response [SEP]; type 0 through the first [SEP].
inline PairSequence build_pair_sequence(const ConversationPair& pair, const Vocab& vocab,
                                        std::size_t max_positions) {
  pair.validate();
  const std::size_t len = pair.query.size() + pair.response.size() + 3;
  if (len > max_positions)
    throw ValueError("build_pair_sequence: length " + std::to_string(len) +
                     " exceeds max_positions " + std::to_string(max_positions));
  PairSequence s;
  s.input_ids.push_back(Vocab::kCls);
  for (const auto& t : pair.query) s.input_ids.push_back(vocab.id(t));
  s.input_ids.push_back(Vocab::kSep);
  const std::size_t resp_off = s.input_ids.size();
  for (const auto& t : pair.response) s.input_ids.push_back(vocab.id(t));
  s.input_ids.push_back(Vocab::kSep);
  s.type_ids.assign(s.input_ids.size(), 1);
  std::fill(s.type_ids.begin(), s.type_ids.begin() + static_cast<std::ptrdiff_t>(resp_off), 0);
  for (const auto& e : pair.query_entities) s.entity_spans.push_back({e.start + 1, e.end + 1});
  for (const auto& e : pair.response_entities)
    s.entity_spans.push_back({e.start + resp_off, e.end + resp_off});
  return s;
}

/// [CLS] tokens [SEP] with all-zero type ids.
inline PairSequence build_single_sequence(const std::vector<std::string>& tokens,
                                          const std::vector<Span>& entities,
                                          const Vocab& vocab, std::size_t max_positions) {
  validate_spans(entities, tokens.size(), "entities");
  const std::size_t len = tokens.size() + 2;
  if (len > max_positions)
    throw ValueError("build_single_sequence: length " + std::to_string(len) +
                     " exceeds max_positions " + std::to_string(max_positions));
  PairSequence s;
  s.input_ids.push_back(Vocab::kCls);
  for (const auto& t : tokens) s.input_ids.push_back(vocab.id(t));
  s.input_ids.push_back(Vocab::kSep);
  s.type_ids.assign(s.input_ids.size(), 0);
  for (const auto& e : entities) s.entity_spans.push_back({e.start + 1, e.end + 1});
  return s;
}

inline CLMExample apply_masking(const PairSequence& seq, const MaskingPolicy& policy,
                                const Vocab& vocab, Rng& rng, MaskingStats* stats = nullptr) {
  policy.validate();
  const std::size_t T = seq.input_ids.size();
  std::vector<std::uint8_t> selected(T, 0);
  std::vector<std::uint8_t> in_entity(T, 0);
  for (const auto& s : seq.entity_spans)
    for (std::size_t i = s.start; i < s.end && i < T; ++i) in_entity[i] = 1;
  auto maskable = [&](std::size_t i) { return !Vocab::is_special(seq.input_ids[i]); };

  switch (policy.mode) {
    case MaskMode::entities_only:
      for (std::size_t i = 0; i < T; ++i)
        if (in_entity[i] && maskable(i) && uniform01(rng) < policy.mask_rate) selected[i] = 1;
      break;
    case MaskMode::standard:
      for (std::size_t i = 0; i < T; ++i)
        if (maskable(i) && uniform01(rng) < policy.mask_rate) selected[i] = 1;
      break;
    case MaskMode::mixed: {
      std::vector<std::uint8_t> decided(T, 0);
      for (const auto& s : seq.entity_spans) {
        if (uniform01(rng) < policy.whole_span_prob) {
          for (std::size_t i = s.start; i < s.end; ++i) {
            if (maskable(i)) selected[i] = 1;
            decided[i] = 1;
          }
        }
      }
      for (std::size_t i = 0; i < T; ++i)
        if (!decided[i] && maskable(i) && uniform01(rng) < policy.mask_rate) selected[i] = 1;
      break;
    }
  }

  CLMExample ex;
  ex.input_ids = seq.input_ids;
  ex.type_ids = seq.type_ids;
  ex.attention_mask.assign(T, 1);
  ex.mlm_labels.assign(T, ops::kIgnore);
  const std::size_t n_regular = vocab.size() - Vocab::kNumReserved;
  std::size_t n_sel = 0;
  for (std::size_t i = 0; i < T; ++i) {
    if (!selected[i]) continue;
    ++n_sel;
    ex.mlm_labels[i] = seq.input_ids[i];
    const double u = uniform01(rng);
    if (u < policy.p_mask_token) {
      ex.input_ids[i] = Vocab::kMask;
      if (stats) ++stats->replaced_mask;
    } else if (u < policy.p_mask_token + policy.p_random_token && n_regular > 0) {
      ex.input_ids[i] = Vocab::kNumReserved + static_cast<int>(uniform_index(rng, n_regular));
      if (stats) ++stats->replaced_random;
    } else if (stats) {
      ++stats->kept;
    }
  }
  if (stats) {
    ++stats->examples;
    stats->selected += n_sel;
    if (n_sel == 0) ++stats->zero_mask_examples;
  }
  return ex;
}

inline CLMExample build_clm_example(const ConversationPair& pair, const Vocab& vocab,
                                    const MaskingPolicy& policy, std::size_t max_positions,
                                    Rng& rng, MaskingStats* stats = nullptr) {
  return apply_masking(build_pair_sequence(pair, vocab, max_positions), policy, vocab, rng, stats);
}

/// Query-side only: the response never enters the example.
inline CLMExample build_query_only_example(const ConversationPair& pair, const Vocab& vocab,
                                           const MaskingPolicy& policy,
                                           std::size_t max_positions, Rng& rng,
                                           MaskingStats* stats = nullptr) {
  return apply_masking(build_single_sequence(pair.query, pair.query_entities, vocab, max_positions),
                       policy, vocab, rng, stats);
}

/// Written-form single segment (the system response used as plain text).
inline CLMExample build_plain_example(const ConversationPair& pair, const Vocab& vocab,
                                      const MaskingPolicy& policy, std::size_t max_positions,
                                      Rng& rng, MaskingStats* stats = nullptr) {
  const auto& toks = pair.response.empty() ? pair.query : pair.response;
  const auto& ents = pair.response.empty() ? pair.query_entities : pair.response_entities;
  return apply_masking(build_single_sequence(toks, ents, vocab, max_positions), policy, vocab,
                       rng, stats);
}

struct Batch {
  std::vector<CLMExample> rows;  // all padded to the same length
  std::size_t width() const { return rows.empty() ? 0 : rows[0].size(); }
};

/// Right-pads each group of `batch_size` examples (in input order) to the
/// longest member, or to `pad_to` when that is longer.
inline std::vector<Batch> batchify(const std::vector<CLMExample>& examples,
                                   std::size_t batch_size, std::size_t pad_to = 0) {
  if (examples.empty()) throw ValueError("batchify: no examples");
  if (batch_size == 0) throw ConfigError("batchify: batch_size must be positive");
  std::vector<Batch> out;
  for (std::size_t b = 0; b < examples.size(); b += batch_size) {
    const std::size_t e = std::min(examples.size(), b + batch_size);
    std::size_t width = pad_to;
    for (std::size_t i = b; i < e; ++i) width = std::max(width, examples[i].size());
    Batch batch;
    for (std::size_t i = b; i < e; ++i) {
      CLMExample row = examples[i];
      row.input_ids.resize(width, Vocab::kPad);
      row.type_ids.resize(width, 0);
      row.attention_mask.resize(width, 0);
      row.mlm_labels.resize(width, ops::kIgnore);
      batch.rows.push_back(std::move(row));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus file: query \t response \t query_spans \t response_spans, spans as
// comma-separated start-end token offsets.

inline std::string format_spans(const std::vector<Span>& spans) {
  std::string out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(spans[i].start) + "-" + std::to_string(spans[i].end);
  }
  return out;
}

inline std::vector<Span> parse_spans(const std::string& field) {
  std::vector<Span> out;
  if (field.empty()) return out;
  std::istringstream is(field);
  for (std::string item; std::getline(is, item, ',');) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw ValueError("span '" + item + "' is not start-end");
    try {
      std::size_t used = 0;
      const auto s = std::stoul(item.substr(0, dash), &used);
      if (used != dash) throw std::invalid_argument("start");
      const auto rest = item.substr(dash + 1);
      const auto e = std::stoul(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("end");
      out.push_back({s, e});
    } catch (const std::logic_error&) {
      throw ValueError("span '" + item + "' is not start-end");
    }
  }
  return out;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> f;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    f.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return f;
}

inline void write_pairs(std::ostream& os, const std::vector<ConversationPair>& pairs) {
  for (const auto& p : pairs)
    os << join(p.query) << '\t' << join(p.response) << '\t' << format_spans(p.query_entities)
       << '\t' << format_spans(p.response_entities) << '\n';
}

inline std::vector<ConversationPair> read_pairs(std::istream& is) {
  std::vector<ConversationPair> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 4)
      throw ValueError("corpus line " + std::to_string(lineno) + ": expected 4 fields, got " +
                       std::to_string(f.size()));
    ConversationPair p{split_ws(f[0]), split_ws(f[1]), parse_spans(f[2]), parse_spans(f[3])};
    try {
      p.validate();
    } catch (const ValueError& e) {
      throw ValueError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline void save_pairs(const std::string& path, const std::vector<ConversationPair>& pairs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_pairs(os, pairs);
}

inline std::vector<ConversationPair> load_pairs(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_pairs(is);
}

}  // namespace lslu
