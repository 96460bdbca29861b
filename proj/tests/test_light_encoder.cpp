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

#include <cmath>

#include "lslu/eval.hpp"
#include "lslu/gradcheck.hpp"
#include "lslu/light_encoder.hpp"
#include "support.hpp"

using namespace lslu;
using lslu::testing::random_tensor;

namespace {

constexpr std::size_t kLayers = 3, kModel = 6;

DomainSchema toy_schema() { return DomainSchema::from_types("toy", {"a", "b", "c"}, {"song", "artist"}); }

LightEncoderConfig small(const std::string& variant, std::size_t hidden = 4) {
  auto c = LightEncoderConfig::variant(variant, hidden);
  c.dropout = 0.0;
  return c;
}

LayerActivations random_acts(std::size_t T, std::uint64_t seed, std::size_t layers = kLayers) {
  Rng rng(seed);
  LayerActivations a;
  for (std::size_t l = 0; l < layers; ++l) a.per_layer.push_back(random_tensor({T, kModel}, rng));
  a.attention_mask.assign(T, 1);
  return a;
}

std::vector<Var> as_vars(Tape& t, const LayerActivations& a) {
  std::vector<Var> v;
  for (const auto& x : a.per_layer) v.push_back(t.constant(x));
  return v;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

const char* kVariants[] = {"concat-lstm", "linear-lstm", "lastlayer-lstm", "concat"};

}  // namespace

TEST(LightConfig, VariantsMapToPoolingAndBiLstm) {
  EXPECT_EQ(LightEncoderConfig::variant("concat-lstm").pooling, Pooling::concat_all);
  EXPECT_TRUE(LightEncoderConfig::variant("concat-lstm").use_bilstm);
  EXPECT_EQ(LightEncoderConfig::variant("linear-lstm").pooling, Pooling::learned_linear);
  EXPECT_EQ(LightEncoderConfig::variant("lastlayer-lstm").pooling, Pooling::last_layer);
  EXPECT_FALSE(LightEncoderConfig::variant("concat").use_bilstm);
  for (const char* v : kVariants) EXPECT_EQ(LightEncoderConfig::variant(v).variant_name(), v);
  EXPECT_THROW(LightEncoderConfig::variant("adapter"), ConfigError);
  EXPECT_THROW(parse_pooling("max"), ConfigError);
  EXPECT_EQ(parse_pooling(to_string(Pooling::learned_linear)), Pooling::learned_linear);
}

TEST(LightConfig, WidthLaws) {
  const auto c = LightEncoderConfig::variant("concat-lstm");
  EXPECT_EQ(c.pool_width(4, 64), 256u);
  EXPECT_EQ(c.pool_width(12, 768), 9216u);
  EXPECT_EQ(LightEncoderConfig::variant("linear-lstm").pool_width(12, 768), 768u);
  EXPECT_EQ(c.rep_width(), 512u);
  EXPECT_EQ(LightEncoderConfig::variant("concat").rep_width(), 256u);
}

TEST(Pooling, SingleLayerDegeneracy) {
  const auto acts = random_acts(4, 1, 1);
  for (const char* v : {"concat-lstm", "linear-lstm", "lastlayer-lstm"}) {
    LightEncoder le(small(v), 1, kModel, toy_schema(), 2);
    Tape t;
    EXPECT_LT(max_abs_diff(le.pool(t, as_vars(t, acts)).value(), acts.per_layer[0]), 1e-15) << v;
  }
}

TEST(Pooling, ConcatOrderAndLastLayer) {
  const auto acts = random_acts(3, 2);
  LightEncoder cat(small("concat-lstm"), kLayers, kModel, toy_schema(), 1);
  LightEncoder last(small("lastlayer-lstm"), kLayers, kModel, toy_schema(), 1);
  Tape t;
  const Tensor y = cat.pool(t, as_vars(t, acts)).value();
  ASSERT_EQ(y.shape(), (Shape{3, kLayers * kModel}));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t l = 0; l < kLayers; ++l)
      for (std::size_t j = 0; j < kModel; ++j) EXPECT_EQ(y(r, l * kModel + j), acts.per_layer[l](r, j));
  EXPECT_EQ(last.pool(t, as_vars(t, acts)).value(), acts.per_layer.back());
  EXPECT_THROW(cat.pool(t, {t.constant(acts.per_layer[0])}), ShapeError);
}

TEST(Pooling, MixerSaturatesAndIsShiftInvariant) {
  const auto acts = random_acts(5, 3);
  LightEncoder le(small("linear-lstm"), kLayers, kModel, toy_schema(), 1);
  auto& w = le.encoder().at("mixer.weights").value;
  w.fill(0.0);
  w[kLayers - 1] = 40.0;
  Tensor saturated;
  {
    Tape t;
    saturated = le.pool(t, as_vars(t, acts)).value();
  }
  EXPECT_LT(max_abs_diff(saturated, acts.per_layer.back()), 1e-10);

  Rng rng(4);
  for (std::size_t k = 0; k < kLayers; ++k) w[k] = normal(rng);
  le.encoder().at("mixer.scale").value[0] = 1.7;
  Tensor base, shifted;
  {
    Tape t;
    base = le.pool(t, as_vars(t, acts)).value();
  }
  for (auto& v : w.vec()) v += 3.25;
  {
    Tape t;
    shifted = le.pool(t, as_vars(t, acts)).value();
  }
  EXPECT_LT(max_abs_diff(base, shifted), 1e-12);
}

TEST(LightEncode, OutputWidths) {
  const auto acts = random_acts(5, 3);
  for (const char* v : kVariants) {
    LightEncoder le(small(v, 4), kLayers, kModel, toy_schema(), 1);
    Tape t;
    Var rep = le.encode(t, le.pool(t, as_vars(t, acts)));
    EXPECT_EQ(rep.cols(), std::string(v) == "concat" ? 4u : 8u) << v;
    EXPECT_EQ(rep.rows(), 5u);
    EXPECT_THROW(le.encode(t, t.constant(Tensor({5, 7}))), ShapeError);
  }
}

TEST(LightEncode, DirectionSymmetry) {
  // reversed input with forward/backward parameter sets exchanged gives the
  // reversed output with the two halves exchanged
  for (std::size_t layers : {1u, 2u}) {
    auto cfg = small("lastlayer-lstm", 3);
    cfg.lstm_layers = layers;
    LightEncoder a(cfg, 1, kModel, toy_schema(), 7);
    LightEncoder b = a;
    const std::size_t h = 3;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string p = "lstm.l" + std::to_string(l) + ".";
      for (const char* n : {"W_ih", "W_hh", "b"})
        std::swap(b.encoder().at(p + "fwd." + n).value, b.encoder().at(p + "bwd." + n).value);
      if (l > 0)  // deeper layers read [fwd | bwd] input columns, which are now swapped
        for (const char* dir : {"fwd.", "bwd."}) {
          auto& W = b.encoder().at(p + dir + "W_ih").value;
          Tensor P = W;
          for (std::size_t r = 0; r < 2 * h; ++r)
            for (std::size_t c = 0; c < W.cols(); ++c) W(r, c) = P((r + h) % (2 * h), c);
        }
    }
    Rng rng(9);
    const Tensor x = random_tensor({6, kModel}, rng);
    Tensor xr({6, kModel});
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t j = 0; j < kModel; ++j) xr(r, j) = x(5 - r, j);
    Tape t;
    const Tensor ya = a.encode(t, t.constant(x)).value();
    const Tensor yb = b.encode(t, t.constant(xr)).value();
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t j = 0; j < 2 * h; ++j) EXPECT_NEAR(yb(5 - r, (j + h) % (2 * h)), ya(r, j), 1e-13);
  }
}

TEST(IcHead, ZeroWeightsGiveUniformDistribution) {
  LightEncoder le(small("concat-lstm"), kLayers, kModel, toy_schema(), 1);
  le.heads().at("ic.W").value.fill(0.0);
  Tape t;
  const auto out = le.forward(t, random_acts(4, 2));
  const auto& p = ops::softmax_rows(out.ic_logits).value();
  for (double v : p.vec()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(IcHead, BiLstmMakesClsContextSensitive) {
  LightEncoder le(small("concat-lstm"), kLayers, kModel, toy_schema(), 1);
  auto acts = random_acts(5, 2);
  auto perm = acts;
  for (auto& l : perm.per_layer)
    for (std::size_t j = 0; j < kModel; ++j) std::swap(l(2, j), l(3, j));
  Tape t;
  const auto a = le.forward(t, acts).ic_logits.value();
  const auto b = le.forward(t, perm).ic_logits.value();
  EXPECT_GT(max_abs_diff(a, b), 1e-8);
  // without the BiLSTM the [CLS] row never sees other tokens
  LightEncoder flat(small("concat"), kLayers, kModel, toy_schema(), 1);
  EXPECT_EQ(flat.forward(t, acts).ic_logits.value(), flat.forward(t, perm).ic_logits.value());
}

TEST(JointLoss, ZeroCrfParametersFactorizeIntoTokenCrossEntropy) {
  LightEncoder le(small("concat-lstm"), kLayers, kModel, toy_schema(), 3);
  Tape t;
  const auto out = le.forward(t, random_acts(7, 5));
  const std::vector<int> gold{0, 1, 2, 0, 3};
  const double joint = le.joint_loss(t, out, 2, gold).value().item();
  const double ic = ops::cross_entropy(out.ic_logits, {2}).value().item();
  const double tokens = ops::cross_entropy(out.emissions, gold).value().item();
  EXPECT_NEAR(joint, ic + tokens, 1e-10);
  EXPECT_GT(ic, 0.0);
  EXPECT_GT(joint - ic, 0.0);
}

TEST(JointLoss, VanishesForDominantGold) {
  LightEncoder le(small("concat"), kLayers, kModel, toy_schema(), 3);
  Tape t;
  Tensor ic({1, 3}, 0.0), em({2, 5}, 0.0);
  ic(0, 1) = 60.0;
  em(0, 1) = 60.0;
  em(1, 2) = 60.0;
  LightOutputs out{t.constant(ic), t.constant(em)};
  EXPECT_LT(le.joint_loss(t, out, 1, {1, 2}).value().item(), 1e-20);
}

TEST(JointLoss, RejectsOutOfRangeLabels) {
  LightEncoder le(small("concat"), kLayers, kModel, toy_schema(), 3);
  Tape t;
  const auto out = le.forward(t, random_acts(4, 5));
  EXPECT_THROW(le.joint_loss(t, out, 3, {0, 0}), ValueError);
  EXPECT_THROW(le.joint_loss(t, out, 0, {0, 5}), ValueError);
  EXPECT_THROW(le.joint_loss(t, out, 0, {0}), ShapeError);
}

class JointGradients : public ::testing::TestWithParam<std::tuple<const char*, int>> {};

TEST_P(JointGradients, MatchFiniteDifferences) {
  const auto [variant, seed] = GetParam();
  auto cfg = small(variant, 3);
  LightEncoder le(cfg, kLayers, kModel, toy_schema(), static_cast<std::uint64_t>(seed));
  Rng rng(static_cast<std::uint64_t>(seed));
  for (auto* s : le.stores())
    for (auto& p : *s)
      for (auto& v : p.value.vec()) v += normal(rng, 0.0, 0.3);
  // activations as parameters so pooling gradients are checked too
  ParameterStore acts;
  const auto a = random_acts(5, static_cast<std::uint64_t>(seed) + 50);
  for (std::size_t l = 0; l < kLayers; ++l) acts.add("layer" + std::to_string(l), a.per_layer[l]);
  std::vector<int> gold(3);
  for (auto& g : gold) g = static_cast<int>(uniform_index(rng, 5));
  const int intent = static_cast<int>(uniform_index(rng, 3));
  auto loss = [&](Tape& t) {
    std::vector<Var> layers;
    for (auto& p : acts) layers.push_back(t.param(p));
    return le.joint_loss(t, le.forward_vars(t, layers, false, nullptr), intent, gold);
  };
  const auto report = finite_difference_check(loss, {&le.encoder(), &le.heads(), &acts});
  EXPECT_LT(report.max_rel_err(), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(VariantsAndSeeds, JointGradients,
                         ::testing::Combine(::testing::ValuesIn(kVariants), ::testing::Range(1, 11)));

class LstmGradients : public ::testing::TestWithParam<int> {};

TEST_P(LstmGradients, CellMatchesFiniteDifferences) {
  auto cfg = small("lastlayer-lstm", 4);
  cfg.lstm_layers = 1;
  LightEncoder le(cfg, 1, kModel, toy_schema(), static_cast<std::uint64_t>(GetParam()));
  Rng rng(static_cast<std::uint64_t>(GetParam()));
  ParameterStore in;
  in.add("x", random_tensor({4, kModel}, rng));
  const Tensor w = random_tensor({4, 8}, rng);
  auto loss = [&](Tape& t) {
    Var rep = le.encode(t, t.param(in.at("x")));
    return ops::sum(ops::mul(rep, t.constant(w)));
  };
  EXPECT_LT(finite_difference_check(loss, {&le.encoder(), &in}).max_rel_err(), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, LstmGradients, ::testing::Range(1, 11));

class PoolingGradients : public ::testing::TestWithParam<std::tuple<const char*, int>> {};

TEST_P(PoolingGradients, MatchFiniteDifferences) {
  const auto [variant, seed] = GetParam();
  LightEncoder le(small(variant), kLayers, kModel, toy_schema(), 1);
  Rng rng(static_cast<std::uint64_t>(seed));
  if (auto* m = le.encoder().find("mixer.weights"))
    for (auto& v : m->value.vec()) v = normal(rng);
  ParameterStore acts;
  for (std::size_t l = 0; l < kLayers; ++l) acts.add("layer" + std::to_string(l), random_tensor({3, kModel}, rng));
  const Tensor w = random_tensor({3, le.pool_width()}, rng);
  auto loss = [&](Tape& t) {
    std::vector<Var> layers;
    for (auto& p : acts) layers.push_back(t.param(p));
    return ops::sum(ops::mul(le.pool(t, layers), t.constant(w)));
  };
  EXPECT_LT(finite_difference_check(loss, {&le.encoder(), &acts}).max_rel_err(), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(VariantsAndSeeds, PoolingGradients,
                         ::testing::Combine(::testing::Values("concat-lstm", "linear-lstm", "lastlayer-lstm"),
                                            ::testing::Range(1, 11)));

TEST(Decode, RepairsOrphanInside) {
  const auto s = DomainSchema::from_types("music", {"play"}, {"song"});
  const auto tags = path_to_tags({s.slot_id("O"), s.slot_id("I-song")}, s);
  EXPECT_EQ(tags, (std::vector<std::string>{"O", "B-song"}));
  const auto spans = extract_spans(tags);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (SlotSpan{"song", 1, 2}));
}

TEST(Decode, PredictIsDeterministicAndRejectsEmpty) {
  const auto vocab = Vocab::from_tokens(std::vector<std::string>{"play", "shake", "it", "off"});
  auto bc = BackboneConfig::toy(vocab.size(), 16);
  bc.n_layers = 2;
  Backbone bb(bc, 1);
  bb.freeze();
  LightEncoder le(small("concat-lstm"), bc.n_layers, bc.d_model, toy_schema(), 1);
  const auto toks = split_ws("play shake it off");
  const auto a = predict(bb, le, vocab, toks);
  const auto b = predict(bb, le, vocab, toks);
  EXPECT_EQ(a.intent, b.intent);
  EXPECT_EQ(a.tags, b.tags);
  EXPECT_EQ(a.tags.size(), 4u);
  EXPECT_TRUE(bio_well_formed(a.tags));
  EXPECT_THROW(predict(bb, le, vocab, {}), ValueError);
}

TEST(ParamCount, AnalyticMatchesInstantiated) {
  const auto schema = toy_schema();
  for (const char* v : kVariants)
    for (std::size_t layers : {1u, 2u}) {
      auto cfg = LightEncoderConfig::variant(v, 5);
      cfg.lstm_layers = layers;
      LightEncoder le(cfg, 4, 8, schema, 1);
      EXPECT_EQ(le.scalar_count(), light_param_breakdown(cfg, 4, 8, schema.n_intents(), schema.n_slots()).total())
          << v;
    }
}

TEST(ParamCount, VariantOrdering) {
  const auto schema = toy_schema();
  auto count = [&](const char* v) {
    return light_param_breakdown(LightEncoderConfig::variant(v, 16), 4, 32, 3, schema.n_slots()).total();
  };
  EXPECT_GT(count("concat-lstm"), count("linear-lstm"));
  EXPECT_GT(count("linear-lstm"), count("concat"));
  EXPECT_EQ(count("linear-lstm") - count("lastlayer-lstm"), 4u + 1u);
}
