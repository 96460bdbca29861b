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

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "lslu/datasim.hpp"
#include "lslu/grammars.hpp"
#include "lslu/pipeline.hpp"
#include "support.hpp"

using namespace lslu;
using namespace lslu::datasim;

namespace {

std::vector<std::vector<std::string>> reference_tokens(const std::vector<LabeledUtterance>& us) {
  std::vector<std::vector<std::string>> out;
  for (const auto& u : us) out.push_back(u.tokens);
  return out;
}

std::vector<std::string> as_strings(const std::vector<int>& s) {
  std::vector<std::string> out;
  for (int c : s) out.push_back(std::string(1, static_cast<char>('a' + c)));
  return out;
}

// Spans predicted from the op list directly: each reference span maps to the
// hyp interval covering its surviving tokens.
std::set<SlotSpan> expected_projection(const std::vector<std::string>& ref_tags, const AlignedPair& a) {
  std::vector<int> hyp_of(a.ref.size(), -1);
  for (const auto& o : a.ops)
    if (o.kind == EditKind::match || o.kind == EditKind::substitute)
      hyp_of[static_cast<std::size_t>(o.ref_idx)] = o.hyp_idx;
  std::set<SlotSpan> out;
  for (const auto& s : extract_spans(ref_tags)) {
    int lo = -1, hi = -1;
    for (std::size_t i = s.start; i < s.end; ++i)
      if (hyp_of[i] >= 0) {
        if (lo < 0) lo = hyp_of[i];
        hi = hyp_of[i];
      }
    if (lo >= 0) out.insert({s.type, static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1});
  }
  return out;
}

}  // namespace

TEST(Grammar, ExpandsSinglePlaceholder) {
  Grammar g;
  g.domain = "toy";
  g.templates = {{"PlayMusic", {"play", "<song>"}, {"playing", "<song>"}, 1.0}};
  g.lexicons = {{"song", {{"shake", "it", "off"}}}};
  const auto c = generate_corpus(g, 1, 0);
  ASSERT_EQ(c.utterances.size(), 1u);
  const auto& u = c.utterances[0];
  EXPECT_EQ(u.tokens, (std::vector<std::string>{"play", "shake", "it", "off"}));
  EXPECT_EQ(u.tags, (std::vector<std::string>{"O", "B-song", "I-song", "I-song"}));
  EXPECT_EQ(u.intent, "PlayMusic");
  EXPECT_EQ(c.pairs[0].query, u.tokens);
  EXPECT_EQ(c.pairs[0].response, (std::vector<std::string>{"playing", "shake", "it", "off"}));
  EXPECT_EQ(c.pairs[0].response_entities, (std::vector<Span>{{1, 4}}));
}

TEST(Grammar, RejectsMissingOrEmptyLexicon) {
  Grammar g;
  g.domain = "toy";
  g.templates = {{"A", {"play", "<song>"}, {}, 1.0}};
  EXPECT_THROW(generate_corpus(g, 1, 0), Error);
  g.lexicons = {{"song", {}}};
  EXPECT_THROW(generate_corpus(g, 1, 0), Error);
  EXPECT_THROW(generate_corpus(music_grammar(), 0, 0), ValueError);
}

TEST(Grammar, BuiltinsHaveToyScaleInventories) {
  const auto m = music_grammar();
  EXPECT_EQ(m.intents().size(), 4u);
  EXPECT_EQ(m.slot_types().size(), 6u);
  for (const auto& g : builtin_grammars()) EXPECT_NO_THROW(g.validate()) << g.domain;
  EXPECT_THROW(grammar_by_name("sports"), ConfigError);
}

TEST(Grammar, DeterministicUnderSeed) {
  const auto a = generate_corpus(music_grammar(), 1000, 7);
  const auto b = generate_corpus(music_grammar(), 1000, 7);
  std::ostringstream sa, sb;
  write_labeled(sa, a.utterances);
  write_labeled(sb, b.utterances);
  EXPECT_EQ(sa.str(), sb.str());
  write_pairs(sa, a.pairs);
  write_pairs(sb, b.pairs);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Grammar, IntentFrequenciesFollowTemplateWeights) {
  const auto g = music_grammar();
  std::map<std::string, double> expect;
  double total = 0.0;
  for (const auto& t : g.templates) {
    expect[t.intent] += t.weight;
    total += t.weight;
  }
  const auto c = generate_corpus(g, 10000, 3);
  std::map<std::string, double> seen;
  for (const auto& u : c.utterances) seen[u.intent] += 1.0 / 10000.0;
  for (const auto& [intent, w] : expect) EXPECT_NEAR(seen[intent], w / total, 0.02) << intent;
}

TEST(Grammar, TagsAreWellFormedAndMatchPairSpans) {
  const auto c = generate_corpus(music_grammar(), 500, 4);
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto& u = c.utterances[i];
    EXPECT_TRUE(bio_well_formed(u.tags));
    EXPECT_EQ(u.tags.size(), u.tokens.size());
    EXPECT_EQ(spans_from_tags(u.tags), c.pairs[i].query_entities);
  }
}

TEST(EditDistance, SimpleCases) {
  const auto s = [](const char* x) { return split_ws(x); };
  EXPECT_EQ(measure_wer(s("a b c"), s("a b c")).errors, 0u);
  const auto w = measure_wer(s("a b c"), s("a x c"));
  EXPECT_EQ(w.errors, 1u);
  EXPECT_EQ(w.ref_tokens, 3u);
  EXPECT_DOUBLE_EQ(w.value(), 1.0 / 3.0);
  EXPECT_THROW(measure_wer({}, s("a")), ValueError);
  EXPECT_EQ(edit_distance(std::string("kitten"), std::string("sitting")), 3u);
}

TEST(EditDistance, MatchesBreadthFirstOracleOnAllShortPairs) {
  // strings up to 6 over {a, b, c}; the graph admits length 7 so shortest
  // scripts are never clipped
  const lslu::testing::EditGraph graph(3, 7);
  std::vector<std::size_t> small;
  for (std::size_t id = 0; id < graph.size(); ++id)
    if (graph.string(id).size() <= 6) small.push_back(id);
  ASSERT_EQ(small.size(), 1093u);
  std::size_t mismatches = 0;
  for (std::size_t a : small) {
    const auto dist = graph.distances(a);
    const auto ref = as_strings(graph.string(a));
    for (std::size_t b : small) {
      const auto hyp = as_strings(graph.string(b));
      if (edit_distance(ref, hyp) != static_cast<std::size_t>(dist[b])) ++mismatches;
    }
  }
  EXPECT_EQ(mismatches, 0u);
}

TEST(Align, ReplaysAndIsOptimal) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::string> r(uniform_index(rng, 7)), h(uniform_index(rng, 7));
    for (auto& t : r) t = std::string(1, static_cast<char>('a' + uniform_index(rng, 3)));
    for (auto& t : h) t = std::string(1, static_cast<char>('a' + uniform_index(rng, 3)));
    const auto a = align(r, h);
    EXPECT_TRUE(a.consistent());
    EXPECT_EQ(a.replay(), h);
    EXPECT_EQ(a.errors(), edit_distance(r, h));
  }
}

TEST(Align, PrefersMatchThenSubstitute) {
  const auto a = align(split_ws("a b"), split_ws("a c"));
  ASSERT_EQ(a.ops.size(), 2u);
  EXPECT_EQ(a.ops[0].kind, EditKind::match);
  EXPECT_EQ(a.ops[1].kind, EditKind::substitute);
}

TEST(NoiseChannel, IdentityAndAllSubstitute) {
  const auto vocab = music_grammar().tokens();
  const auto ref = split_ws("play shake it off by taylor swift");
  Rng rng(2);
  const NoiseChannel id({}, vocab);
  const auto a = id.corrupt(ref, rng);
  EXPECT_EQ(a.hyp, ref);
  for (const auto& o : a.ops) EXPECT_EQ(o.kind, EditKind::match);

  NoiseChannelConfig sub;
  sub.p_sub = 1.0;
  for (auto mode : {ConfusionMode::uniform_vocab, ConfusionMode::edit1_neighbor}) {
    sub.confusion = mode;
    const NoiseChannel ch(sub, vocab);
    const auto b = ch.corrupt(ref, rng);
    ASSERT_EQ(b.hyp.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(b.ops[i].kind, EditKind::substitute);
      if (mode == ConfusionMode::uniform_vocab) EXPECT_NE(b.hyp[i], ref[i]);
    }
  }
}

TEST(NoiseChannel, RecordedOpsReplayExactly) {
  const auto vocab = music_grammar().tokens();
  const auto corpus = generate_corpus(music_grammar(), 300, 1);
  const NoiseChannel ch({0.2, 0.1, 0.1, ConfusionMode::uniform_vocab, 0}, vocab);
  Rng rng(6);
  for (const auto& u : corpus.utterances) {
    const auto a = ch.corrupt(u.tokens, rng);
    EXPECT_TRUE(a.consistent());
    EXPECT_EQ(a.replay(), a.hyp);
  }
}

TEST(NoiseChannel, ConfigValidation) {
  EXPECT_THROW(NoiseChannel({0.7, 0.4, 0.0}, {"a", "b"}), ConfigError);
  EXPECT_THROW(NoiseChannel({-0.1, 0.0, 0.0}, {"a", "b"}), ConfigError);
  EXPECT_THROW(NoiseChannel({}, {"a"}), ConfigError);
  EXPECT_THROW(parse_confusion_mode("phonetic"), ConfigError);
}

TEST(NoiseChannel, ExpectedRateHoldsAtLowRates) {
  const auto g = music_grammar();
  const auto vocab = g.tokens();
  Rng data(1);
  std::vector<std::vector<std::string>> refs;
  std::size_t n = 0;
  std::uint64_t s = 0;
  while (n < 100000) {
    for (auto& u : generate_corpus(g, 1000, ++s).utterances) {
      n += u.tokens.size();
      refs.push_back(std::move(u.tokens));
    }
  }
  for (NoiseChannelConfig cfg : {NoiseChannelConfig{0.05, 0.02, 0.03}, NoiseChannelConfig{0.2, 0.05, 0.05},
                                 NoiseChannelConfig{0.0, 0.0, 0.3}}) {
    const NoiseChannel ch(cfg, vocab);
    Rng rng(9);
    std::vector<std::vector<std::string>> hyps;
    for (const auto& r : refs) hyps.push_back(ch.corrupt(r, rng).hyp);
    EXPECT_NEAR(corpus_wer(refs, hyps).value(), cfg.expected_error_rate(), 0.01);
  }
}

TEST(NoiseChannel, CalibratesToTargetRates) {
  const auto g = music_grammar();
  const auto sample = reference_tokens(generate_corpus(g, 2000, 11).utterances);
  std::vector<std::vector<std::string>> refs;
  std::size_t n = 0;
  for (std::uint64_t s = 100; n < 100000; ++s)
    for (auto& u : generate_corpus(g, 1000, s).utterances) {
      n += u.tokens.size();
      refs.push_back(std::move(u.tokens));
    }
  for (double target : {0.162, 0.184}) {
    const auto cfg = calibrate_channel(target, g.tokens(), sample, {}, ConfusionMode::uniform_vocab, 5);
    const NoiseChannel ch(cfg, g.tokens());
    Rng rng(77);
    std::vector<std::vector<std::string>> hyps;
    for (const auto& r : refs) hyps.push_back(ch.corrupt(r, rng).hyp);
    EXPECT_NEAR(corpus_wer(refs, hyps).value(), target, 0.01) << target;
  }
  EXPECT_THROW(calibrate_channel(1.5, g.tokens(), sample), ConfigError);
}

TEST(Projection, HandWorkedCases) {
  const auto ref = split_ws("play shake it off");
  const std::vector<std::string> tags{"O", "B-song", "I-song", "I-song"};
  AlignedPair id{ref, ref, {}};
  for (int i = 0; i < 4; ++i) id.ops.push_back({EditKind::match, i, i});
  EXPECT_EQ(project_labels(tags, id), tags);

  AlignedPair del{ref, split_ws("play shake off"),
                  {{EditKind::match, 0, 0}, {EditKind::match, 1, 1}, {EditKind::del, 2, -1}, {EditKind::match, 3, 2}}};
  EXPECT_EQ(project_labels(tags, del), (std::vector<std::string>{"O", "B-song", "I-song"}));

  // deleting the B leaves an orphan I that is repaired
  AlignedPair delb{ref, split_ws("play it off"),
                   {{EditKind::match, 0, 0}, {EditKind::del, 1, -1}, {EditKind::match, 2, 1}, {EditKind::match, 3, 2}}};
  EXPECT_EQ(project_labels(tags, delb), (std::vector<std::string>{"O", "B-song", "I-song"}));

  // interior insertion joins the span, boundary insertions stay O
  AlignedPair ins{ref, split_ws("uh play shake uh it off uh"),
                  {{EditKind::insert, -1, 0},
                   {EditKind::match, 0, 1},
                   {EditKind::match, 1, 2},
                   {EditKind::insert, -1, 3},
                   {EditKind::match, 2, 4},
                   {EditKind::match, 3, 5},
                   {EditKind::insert, -1, 6}}};
  EXPECT_EQ(project_labels(tags, ins),
            (std::vector<std::string>{"O", "O", "B-song", "I-song", "I-song", "I-song", "O"}));

  EXPECT_THROW(project_labels({"O"}, id), ValueError);
}

TEST(Projection, RandomDrawsAreWellFormedAndFaithful) {
  const auto g = music_grammar();
  const auto corpus = generate_corpus(g, 500, 21);
  Rng rng(3);
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    NoiseChannelConfig cfg{uniform(rng, 0.0, 0.4), uniform(rng, 0.0, 0.3), uniform(rng, 0.0, 0.3),
                           i % 2 ? ConfusionMode::uniform_vocab : ConfusionMode::edit1_neighbor, 0};
    const NoiseChannel ch(cfg, g.tokens());
    AlignedPair a;
    const auto out = corrupt_utterance(u, ch, rng, &a);
    EXPECT_TRUE(bio_well_formed(out.tags));
    EXPECT_EQ(out.tags.size(), out.tokens.size());
    EXPECT_EQ(out.intent, u.intent);
    EXPECT_EQ(out.provenance, Provenance::hypothesis);
    std::set<std::string> ref_types, hyp_types;
    for (const auto& s : extract_spans(u.tags)) ref_types.insert(s.type);
    for (const auto& s : extract_spans(out.tags)) hyp_types.insert(s.type);
    EXPECT_TRUE(std::includes(ref_types.begin(), ref_types.end(), hyp_types.begin(), hyp_types.end()));
    const auto got = extract_spans(out.tags);
    EXPECT_EQ(std::set<SlotSpan>(got.begin(), got.end()), expected_projection(u.tags, a)) << i;
  }
  const NoiseChannel identity({}, g.tokens());
  for (const auto& u : corpus.utterances) EXPECT_EQ(corrupt_utterance(u, identity, rng).tags, u.tags);
}

TEST(Split, SizesPartitionAndDeterminism) {
  std::vector<int> data(1000);
  std::iota(data.begin(), data.end(), 0);
  const auto parts = split_corpus(data, {0.8, 0.1, 0.1}, 5);
  EXPECT_EQ(parts[0].size(), 800u);
  EXPECT_EQ(parts[1].size(), 100u);
  EXPECT_EQ(parts[2].size(), 100u);
  std::multiset<int> all;
  for (const auto& p : parts) all.insert(p.begin(), p.end());
  EXPECT_EQ(all, std::multiset<int>(data.begin(), data.end()));
  EXPECT_EQ(split_corpus(data, {0.8, 0.1, 0.1}, 5), parts);
  EXPECT_EQ(split_corpus(data, {1.0}, 5)[0].size(), 1000u);
  EXPECT_THROW(split_corpus(data, {0.5, 0.6}, 1), ValueError);
  EXPECT_THROW(split_corpus(data, {1.0, 0.0}, 1), ValueError);
}

TEST(LabeledFile, RoundTripAndErrors) {
  const auto c = generate_corpus(music_grammar(), 50, 2);
  auto us = c.utterances;
  us[3].provenance = Provenance::hypothesis;
  std::stringstream ss;
  write_labeled(ss, us);
  const auto back = read_labeled(ss);
  ASSERT_EQ(back.size(), us.size());
  for (std::size_t i = 0; i < us.size(); ++i) {
    EXPECT_EQ(back[i].tokens, us[i].tokens);
    EXPECT_EQ(back[i].tags, us[i].tags);
    EXPECT_EQ(back[i].intent, us[i].intent);
    EXPECT_EQ(back[i].domain, us[i].domain);
    EXPECT_EQ(back[i].provenance, us[i].provenance);
  }
  std::istringstream bad("music\tPlay\tplay it\tO\treference\n");
  EXPECT_THROW(read_labeled(bad), ValueError);
  std::istringstream bad2("music\tPlay\tplay\tO\tasr\n");
  EXPECT_THROW(read_labeled(bad2), ValueError);
  EXPECT_THROW(load_labeled("/nonexistent/x.tsv"), IoError);
}

TEST(Pipeline, DomainDataShapesAndNoise) {
  DatagenConfig cfg;
  cfg.train_size = 100;
  cfg.test_size = 60;
  cfg.pair_count = 80;
  cfg.seed = 3;
  const auto d = generate_domain_data(music_grammar(), cfg);
  EXPECT_EQ(d.train.size(), 100u);
  EXPECT_EQ(d.test.size(), 60u);
  EXPECT_EQ(d.test_noisy.size(), 60u);
  EXPECT_EQ(d.pairs.size(), 80u);
  for (const auto& u : d.test_noisy) {
    EXPECT_FALSE(u.tokens.empty());
    EXPECT_TRUE(bio_well_formed(u.tags));
  }
  for (const auto& p : d.pairs) EXPECT_NO_THROW(p.validate());
  EXPECT_NEAR(d.test_channel.expected_error_rate(), 0.162, 0.05);
}
