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

#include <string>
#include <vector>

#include "lslu/clm_data.hpp"
#include "lslu/datasim.hpp"
#include "lslu/grammars.hpp"
#include "lslu/random.hpp"

namespace lslu {

struct DatagenConfig {
  std::size_t train_size = 500;
  std::size_t test_size = 200;
  std::size_t pair_count = 400;
  double test_wer = 0.162;   // corrupted copy of the test split
  double pair_wer = 0.162;   // queries of the pre-training pairs
  std::uint64_t seed = 0;
};

struct DomainData {
  std::vector<datasim::LabeledUtterance> train;
  std::vector<datasim::LabeledUtterance> test;
  std::vector<datasim::LabeledUtterance> test_noisy;
  std::vector<ConversationPair> pairs;
  DomainSchema schema;
  datasim::NoiseChannelConfig test_channel;
  datasim::NoiseChannelConfig pair_channel;
};

/// Corrupts until the hypothesis is non-empty (an all-deleted utterance has
/// nothing to label).
inline datasim::LabeledUtterance corrupt_nonempty(const datasim::LabeledUtterance& u,
                                                  const datasim::NoiseChannel& ch, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto out = datasim::corrupt_utterance(u, ch, rng);
    if (!out.tokens.empty()) return out;
  }
  throw NumericError("noise channel deleted every token 1000 times in a row");
}

inline datasim::NoiseChannelConfig calibrated_channel(const datasim::Grammar& g, double wer,
                                                      const std::vector<datasim::LabeledUtterance>& sample,
                                                      std::uint64_t seed) {
  if (wer <= 0.0) return {};
  std::vector<std::vector<std::string>> refs;
  for (const auto& u : sample) refs.push_back(u.tokens);
  return datasim::calibrate_channel(wer, g.tokens(), refs, {}, datasim::ConfusionMode::uniform_vocab, seed);
}

/// Labeled train/test splits, a corrupted test copy, and conversation pairs
/// whose queries went through the noise channel.
inline DomainData generate_domain_data(const datasim::Grammar& g, const DatagenConfig& cfg) {
  if (cfg.train_size == 0 || cfg.test_size == 0)
    throw ConfigError("datagen: train_size and test_size must be positive");
  DomainData d;
  d.schema = g.schema();
  const std::size_t n = cfg.train_size + cfg.test_size;
  const auto corpus = datasim::generate_corpus(g, n, derive_seed(cfg.seed, 1));
  const double ft = static_cast<double>(cfg.train_size) / static_cast<double>(n);
  auto parts = datasim::split_corpus(corpus.utterances, {ft, 1.0 - ft}, derive_seed(cfg.seed, 2));
  d.train = std::move(parts[0]);
  d.test = std::move(parts[1]);

  d.test_channel = calibrated_channel(g, cfg.test_wer, d.train, derive_seed(cfg.seed, 3));
  {
    datasim::NoiseChannel ch(d.test_channel, g.tokens());
    Rng rng(derive_seed(cfg.seed, 4));
    for (const auto& u : d.test) d.test_noisy.push_back(corrupt_nonempty(u, ch, rng));
  }

  if (cfg.pair_count > 0) {
    const auto pc = datasim::generate_corpus(g, cfg.pair_count, derive_seed(cfg.seed, 5));
    d.pair_channel = calibrated_channel(g, cfg.pair_wer, pc.utterances, derive_seed(cfg.seed, 6));
    datasim::NoiseChannel ch(d.pair_channel, g.tokens());
    Rng rng(derive_seed(cfg.seed, 7));
    for (std::size_t i = 0; i < pc.pairs.size(); ++i) {
      ConversationPair p = pc.pairs[i];
      if (cfg.pair_wer > 0.0) {
        const auto noisy = corrupt_nonempty(pc.utterances[i], ch, rng);
        p.query = noisy.tokens;
        p.query_entities = datasim::spans_from_tags(noisy.tags);
      }
      d.pairs.push_back(std::move(p));
    }
  }
  return d;
}

}  // namespace lslu
