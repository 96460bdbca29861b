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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "lslu/bio.hpp"
#include "lslu/clm_data.hpp"
#include "lslu/error.hpp"
#include "lslu/random.hpp"

namespace lslu::datasim {

// ---------------------------------------------------------------------------
// Grammar-driven corpus generation

/// A query pattern and its system response; `<slot>` tokens are placeholders
/// drawn from the grammar's lexicons.
struct Template {
  std::string intent;
  std::vector<std::string> query;
  std::vector<std::string> response;
  double weight = 1.0;
};

struct Grammar {
  std::string domain;
  std::vector<Template> templates;
  std::map<std::string, std::vector<std::vector<std::string>>> lexicons;

  static bool is_placeholder(const std::string& tok) {
    return tok.size() > 2 && tok.front() == '<' && tok.back() == '>';
  }
  static std::string slot_of(const std::string& tok) { return tok.substr(1, tok.size() - 2); }

  void validate() const {
    if (templates.empty()) throw ConfigError("grammar " + domain + ": no templates");
    for (const auto& t : templates) {
      if (t.weight <= 0) throw ConfigError("grammar " + domain + ": non-positive template weight");
      if (t.query.empty()) throw ConfigError("grammar " + domain + ": empty query pattern");
      for (const auto* pat : {&t.query, &t.response})
        for (const auto& tok : *pat)
          if (is_placeholder(tok)) {
            auto it = lexicons.find(slot_of(tok));
            if (it == lexicons.end())
              throw ConfigError("grammar " + domain + ": placeholder " + tok +
                                " names no lexicon");
            if (it->second.empty())
              throw ConfigError("grammar " + domain + ": lexicon '" + it->first + "' is empty");
          }
    }
  }

  std::vector<std::string> intents() const {
    std::vector<std::string> out;
    for (const auto& t : templates)
      if (std::find(out.begin(), out.end(), t.intent) == out.end()) out.push_back(t.intent);
    return out;
  }

  /// Slot types that appear in query patterns.
  std::vector<std::string> slot_types() const {
    std::vector<std::string> out;
    for (const auto& t : templates)
      for (const auto& tok : t.query)
        if (is_placeholder(tok) &&
            std::find(out.begin(), out.end(), slot_of(tok)) == out.end())
          out.push_back(slot_of(tok));
    return out;
  }

  DomainSchema schema() const { return DomainSchema::from_types(domain, intents(), slot_types()); }

  /// Every token the grammar can emit.
  std::vector<std::string> tokens() const {
    std::set<std::string> seen;
    std::vector<std::string> out;
    auto add = [&](const std::string& t) {
      const auto f = fold_case(t);
      if (seen.insert(f).second) out.push_back(f);
    };
    for (const auto& t : templates)
      for (const auto* pat : {&t.query, &t.response})
        for (const auto& tok : *pat)
          if (!is_placeholder(tok)) add(tok);
    for (const auto& [_, entries] : lexicons)
      for (const auto& e : entries)
        for (const auto& tok : e) add(tok);
    return out;
  }
};

enum class Provenance { reference, hypothesis };

inline std::string to_string(Provenance p) {
  return p == Provenance::reference ? "reference" : "hypothesis";
}

struct LabeledUtterance {
  std::string domain;
  std::vector<std::string> tokens;
  std::string intent;
  std::vector<std::string> tags;
  Provenance provenance = Provenance::reference;

  friend bool operator==(const LabeledUtterance&, const LabeledUtterance&) = default;
};

struct GeneratedCorpus {
  std::vector<LabeledUtterance> utterances;
  std::vector<ConversationPair> pairs;
};

/// Expands `n` templates drawn by weight, with uniformly drawn lexicon
/// entries. A slot that appears in both query and response reuses the same
/// entity.
inline GeneratedCorpus generate_corpus(const Grammar& g, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValueError("generate_corpus: n must be at least 1");
  g.validate();
  Rng rng(seed);
  std::vector<double> cum;
  double total = 0.0;
  for (const auto& t : g.templates) cum.push_back(total += t.weight);
  GeneratedCorpus out;
  out.utterances.reserve(n);
  out.pairs.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = uniform01(rng) * total;
    const std::size_t ti = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(),
                                 static_cast<std::ptrdiff_t>(cum.size() - 1)));
    const Template& tpl = g.templates[ti];
    std::map<std::string, const std::vector<std::string>*> chosen;
    auto pick = [&](const std::string& slot) {
      auto it = chosen.find(slot);
      if (it != chosen.end()) return it->second;
      const auto& lex = g.lexicons.at(slot);
      const auto* e = &lex[uniform_index(rng, lex.size())];
      chosen.emplace(slot, e);
      return e;
    };
    auto expand = [&](const std::vector<std::string>& pattern, std::vector<std::string>& toks,
                      std::vector<std::string>* tags, std::vector<Span>& spans) {
      for (const auto& tok : pattern) {
        if (!Grammar::is_placeholder(tok)) {
          toks.push_back(fold_case(tok));
          if (tags) tags->push_back("O");
          continue;
        }
        const auto slot = Grammar::slot_of(tok);
        const auto* entity = pick(slot);
        spans.push_back({toks.size(), toks.size() + entity->size()});
        for (std::size_t k = 0; k < entity->size(); ++k) {
          toks.push_back(fold_case((*entity)[k]));
          if (tags) tags->push_back((k == 0 ? "B-" : "I-") + slot);
        }
      }
    };
    LabeledUtterance utt;
    utt.domain = g.domain;
    utt.intent = tpl.intent;
    ConversationPair pair;
    expand(tpl.query, utt.tokens, &utt.tags, pair.query_entities);
    expand(tpl.response, pair.response, nullptr, pair.response_entities);
    pair.query = utt.tokens;
    out.utterances.push_back(std::move(utt));
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edit distance and alignment

enum class EditKind { match, substitute, del, insert };

struct EditOp {
  EditKind kind;
  int ref_idx = -1;  // -1 for insertions
  int hyp_idx = -1;  // -1 for deletions
  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct AlignedPair {
  std::vector<std::string> ref;
  std::vector<std::string> hyp;
  std::vector<EditOp> ops;

  std::size_t errors() const {
    return static_cast<std::size_t>(std::count_if(
        ops.begin(), ops.end(), [](const EditOp& o) { return o.kind != EditKind::match; }));
  }

  /// Rebuilds the hypothesis from `ref` and the ops; inserted and
  /// substituted tokens are read from `hyp`.
  std::vector<std::string> replay() const {
    std::vector<std::string> out;
    for (const auto& o : ops) {
      switch (o.kind) {
        case EditKind::match:
          out.push_back(ref.at(static_cast<std::size_t>(o.ref_idx)));
          break;
        case EditKind::substitute:
        case EditKind::insert:
          out.push_back(hyp.at(static_cast<std::size_t>(o.hyp_idx)));
          break;
        case EditKind::del:
          break;
      }
    }
    return out;
  }

  /// Op indices are strictly increasing and cover ref and hyp exactly.
  bool consistent() const {
    int r = 0, h = 0;
    for (const auto& o : ops) {
      const bool has_r = o.kind != EditKind::insert, has_h = o.kind != EditKind::del;
      if (has_r != (o.ref_idx >= 0) || has_h != (o.hyp_idx >= 0)) return false;
      if (has_r && o.ref_idx != r++) return false;
      if (has_h && o.hyp_idx != h++) return false;
      if (o.kind == EditKind::match && ref[static_cast<std::size_t>(o.ref_idx)] !=
                                           hyp[static_cast<std::size_t>(o.hyp_idx)])
        return false;
    }
    return r == static_cast<int>(ref.size()) && h == static_cast<int>(hyp.size());
  }
};

/// Unit-cost Levenshtein distance.
template <typename Seq>
std::size_t edit_distance(const Seq& ref, const Seq& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Minimum-edit alignment. Among optimal back-pointers the preference is
/// match > substitute > delete > insert.
inline AlignedPair align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1), d[i - 1][j] + 1,
                          d[i][j - 1] + 1});
  AlignedPair out{ref, hyp, {}};
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      out.ops.push_back({EditKind::match, static_cast<int>(i - 1), static_cast<int>(j - 1)});
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      out.ops.push_back({EditKind::substitute, static_cast<int>(i - 1), static_cast<int>(j - 1)});
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      out.ops.push_back({EditKind::del, static_cast<int>(i - 1), -1});
      --i;
    } else {
      out.ops.push_back({EditKind::insert, -1, static_cast<int>(j - 1)});
      --j;
    }
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

/// Error count over reference length, kept as a ratio of integers.
struct WordErrorRate {
  std::size_t errors = 0;
  std::size_t ref_tokens = 0;
  double value() const { return static_cast<double>(errors) / static_cast<double>(ref_tokens); }
};

inline WordErrorRate measure_wer(const std::vector<std::string>& ref,
                                 const std::vector<std::string>& hyp) {
  if (ref.empty()) throw ValueError("measure_wer: empty reference");
  return {edit_distance(ref, hyp), ref.size()};
}

/// Pooled WER: total edits over total reference tokens.
inline WordErrorRate corpus_wer(const std::vector<std::vector<std::string>>& refs,
                                const std::vector<std::vector<std::string>>& hyps) {
  if (refs.size() != hyps.size())
    throw ValueError("corpus_wer: " + std::to_string(refs.size()) + " references vs " +
                     std::to_string(hyps.size()) + " hypotheses");
  WordErrorRate w;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    w.errors += edit_distance(refs[i], hyps[i]);
    w.ref_tokens += refs[i].size();
  }
  if (w.ref_tokens == 0) throw ValueError("corpus_wer: empty reference corpus");
  return w;
}

// ---------------------------------------------------------------------------
// Noise channel

enum class ConfusionMode { uniform_vocab, edit1_neighbor };

inline ConfusionMode parse_confusion_mode(const std::string& s) {
  if (s == "uniform_vocab") return ConfusionMode::uniform_vocab;
  if (s == "edit1_neighbor") return ConfusionMode::edit1_neighbor;
  throw ConfigError("noise channel: unknown confusion mode '" + s + "'");
}

struct NoiseChannelConfig {
  double p_sub = 0.0;
  double p_del = 0.0;
  double p_ins = 0.0;
  ConfusionMode confusion = ConfusionMode::uniform_vocab;
  std::uint64_t seed = 0;

  void validate() const {
    for (double p : {p_sub, p_del, p_ins})
      if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("noise channel: probabilities must lie in [0, 1]");
    if (p_sub + p_del > 1.0) throw ConfigError("noise channel: p_sub + p_del exceeds 1");
  }

  double expected_error_rate() const { return p_sub + p_del + p_ins; }
};

/// Token-level substitute/delete/insert channel standing in for a TTS+ASR
/// round trip. It records the edits it makes, so the returned alignment is
/// exact rather than re-estimated.
class NoiseChannel {
 public:
  NoiseChannel(NoiseChannelConfig cfg, std::vector<std::string> vocabulary)
      : cfg_(cfg), vocab_(std::move(vocabulary)) {
    cfg_.validate();
    if (vocab_.size() < 2) throw ConfigError("noise channel: vocabulary needs at least 2 tokens");
    std::sort(vocab_.begin(), vocab_.end());
    vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
    if (cfg_.confusion == ConfusionMode::edit1_neighbor) {
      for (std::size_t i = 0; i < vocab_.size(); ++i) {
        std::vector<std::size_t> nb;
        for (std::size_t j = 0; j < vocab_.size(); ++j)
          if (i != j && edit_distance(vocab_[i], vocab_[j]) <= 1) nb.push_back(j);
        neighbors_.emplace(vocab_[i], std::move(nb));
      }
    }
  }

  const NoiseChannelConfig& config() const { return cfg_; }

  AlignedPair corrupt(const std::vector<std::string>& ref, Rng& rng) const {
    AlignedPair out;
    out.ref = ref;
    int h = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (cfg_.p_ins > 0.0 && uniform01(rng) < cfg_.p_ins) {
        out.hyp.push_back(vocab_[uniform_index(rng, vocab_.size())]);
        out.ops.push_back({EditKind::insert, -1, h++});
      }
      const double u = uniform01(rng);
      const int r = static_cast<int>(i);
      if (u < cfg_.p_del) {
        out.ops.push_back({EditKind::del, r, -1});
      } else if (u < cfg_.p_del + cfg_.p_sub) {
        out.hyp.push_back(confuse(ref[i], rng));
        out.ops.push_back({EditKind::substitute, r, h++});
      } else {
        out.hyp.push_back(ref[i]);
        out.ops.push_back({EditKind::match, r, h++});
      }
    }
    return out;
  }

 private:
  std::string confuse(const std::string& tok, Rng& rng) const {
    if (cfg_.confusion == ConfusionMode::edit1_neighbor) {
      auto it = neighbors_.find(tok);
      if (it != neighbors_.end() && !it->second.empty())
        return vocab_[it->second[uniform_index(rng, it->second.size())]];
    }
    // uniform over the vocabulary minus the original token
    auto self = std::lower_bound(vocab_.begin(), vocab_.end(), tok);
    const bool in_vocab = self != vocab_.end() && *self == tok;
    const std::size_t n = vocab_.size() - (in_vocab ? 1 : 0);
    std::size_t k = uniform_index(rng, n);
    if (in_vocab && k >= static_cast<std::size_t>(self - vocab_.begin())) ++k;
    return vocab_[k];
  }

  NoiseChannelConfig cfg_;
  std::vector<std::string> vocab_;
  std::map<std::string, std::vector<std::size_t>> neighbors_;
};

/// Relative split of a target error rate across the three edit types.
struct ErrorMix {
  double sub = 0.6;
  double del = 0.2;
  double ins = 0.2;
};

/// Finds channel probabilities whose measured corpus WER on `sample` hits
/// `target`: starts from the nominal rates and rescales by target/measured.
inline NoiseChannelConfig calibrate_channel(double target, const std::vector<std::string>& vocabulary,
                                            const std::vector<std::vector<std::string>>& sample,
                                            ErrorMix mix = {},
                                            ConfusionMode mode = ConfusionMode::uniform_vocab,
                                            std::uint64_t seed = 0, int iterations = 4) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("calibrate_channel: target outside (0, 1)");
  const double total = mix.sub + mix.del + mix.ins;
  if (total <= 0.0) throw ConfigError("calibrate_channel: empty error mix");
  double rate = target;
  NoiseChannelConfig cfg;
  for (int it = 0; it <= iterations; ++it) {
    cfg = {rate * mix.sub / total, rate * mix.del / total, rate * mix.ins / total, mode, seed};
    if (it == iterations) break;
    NoiseChannel ch(cfg, vocabulary);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(it)));
    std::vector<std::vector<std::string>> hyps;
    hyps.reserve(sample.size());
    for (const auto& s : sample) hyps.push_back(ch.corrupt(s, rng).hyp);
    const double measured = corpus_wer(sample, hyps).value();
    if (measured <= 0.0) break;
    rate *= target / measured;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Label projection

/// Carries reference BIO tags onto the hypothesis side of an alignment.
/// Matched and substituted tokens copy the reference tag; deleted tokens
/// drop it; an inserted token becomes I-X when it falls strictly inside a
/// projected X span, O otherwise. Orphan I-X tags are then repaired to B-X.
inline std::vector<std::string> project_labels(const std::vector<std::string>& ref_tags,
                                               const AlignedPair& alignment) {
  if (ref_tags.size() != alignment.ref.size())
    throw ValueError("project_labels: " + std::to_string(ref_tags.size()) + " tags for " +
                     std::to_string(alignment.ref.size()) + " reference tokens");
  if (!alignment.consistent())
    throw ValueError("project_labels: alignment does not cover reference and hypothesis");
  const std::size_t m = alignment.hyp.size();
  std::vector<std::string> hyp(m);
  std::vector<std::uint8_t> inserted(m, 0);
  for (const auto& o : alignment.ops) {
    if (o.kind == EditKind::del) continue;
    const auto h = static_cast<std::size_t>(o.hyp_idx);
    if (o.kind == EditKind::insert)
      inserted[h] = 1;
    else
      hyp[h] = ref_tags[static_cast<std::size_t>(o.ref_idx)];
  }
  for (std::size_t h = 0; h < m; ++h) {
    if (!inserted[h]) continue;
    std::string prev, next;
    for (std::size_t k = h; k-- > 0;)
      if (!inserted[k]) {
        prev = hyp[k];
        break;
      }
    for (std::size_t k = h + 1; k < m; ++k)
      if (!inserted[k]) {
        next = hyp[k];
        break;
      }
    hyp[h] = "O";
    if (!prev.empty() && !next.empty() && prev != "O") {
      const BioTag p = parse_bio(prev), n = parse_bio(next);
      if (n.kind == 'I' && n.type == p.type) hyp[h] = "I-" + p.type;
    }
  }
  return repair_bio(std::move(hyp));
}

/// Corrupts a labeled utterance: tokens go through the channel, tags are
/// projected, the intent label is kept as is.
inline LabeledUtterance corrupt_utterance(const LabeledUtterance& u, const NoiseChannel& ch,
                                          Rng& rng, AlignedPair* alignment_out = nullptr) {
  AlignedPair a = ch.corrupt(u.tokens, rng);
  LabeledUtterance out;
  out.domain = u.domain;
  out.intent = u.intent;
  out.tags = project_labels(u.tags, a);
  out.tokens = a.hyp;
  out.provenance = Provenance::hypothesis;
  if (alignment_out) *alignment_out = std::move(a);
  return out;
}

/// Recomputes entity spans of a corrupted query from its projected tags.
inline std::vector<Span> spans_from_tags(const std::vector<std::string>& tags) {
  std::vector<Span> out;
  for (const auto& s : extract_spans(tags)) out.push_back({s.start, s.end});
  return out;
}

// ---------------------------------------------------------------------------
// Splitting and file formats

/// Seeded shuffle, then consecutive slices sized by largest remainder.
template <typename T>
std::vector<std::vector<T>> split_corpus(const std::vector<T>& corpus,
                                         const std::vector<double>& fractions,
                                         std::uint64_t seed) {
  if (fractions.empty()) throw ValueError("split_corpus: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ValueError("split_corpus: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValueError("split_corpus: fractions must sum to 1");
  const std::size_t n = corpus.size();
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[i];
    rem.push_back({exact - static_cast<double>(sizes[i]), i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[rem[k % rem.size()].second];

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(idx, rng);
  std::vector<std::vector<T>> out(fractions.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    for (std::size_t k = 0; k < sizes[i]; ++k) out[i].push_back(corpus[idx[pos++]]);
  return out;
}

/// domain \t intent \t tokens \t tags \t provenance
inline void write_labeled(std::ostream& os, const std::vector<LabeledUtterance>& corpus) {
  for (const auto& u : corpus)
    os << u.domain << '\t' << u.intent << '\t' << join(u.tokens) << '\t' << join(u.tags) << '\t'
       << to_string(u.provenance) << '\n';
}

inline std::vector<LabeledUtterance> read_labeled(std::istream& is) {
  std::vector<LabeledUtterance> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    auto fail = [&](const std::string& why) {
      throw ValueError("labeled corpus line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 5) fail("expected 5 fields, got " + std::to_string(f.size()));
    LabeledUtterance u;
    u.domain = f[0];
    u.intent = f[1];
    u.tokens = split_ws(f[2]);
    u.tags = split_ws(f[3]);
    if (u.tokens.size() != u.tags.size()) fail("token and tag counts differ");
    for (const auto& t : u.tags) {
      try {
        parse_bio(t);
      } catch (const ValueError& e) {
        fail(e.what());
      }
    }
    if (f[4] == "reference")
      u.provenance = Provenance::reference;
    else if (f[4] == "hypothesis")
      u.provenance = Provenance::hypothesis;
    else
      fail("unknown provenance '" + f[4] + "'");
    out.push_back(std::move(u));
  }
  return out;
}

inline void save_labeled(const std::string& path, const std::vector<LabeledUtterance>& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_labeled(os, corpus);
}

inline std::vector<LabeledUtterance> load_labeled(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_labeled(is);
}

}  // namespace lslu::datasim
