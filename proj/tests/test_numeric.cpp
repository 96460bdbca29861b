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
#include <numeric>

#include "lslu/autodiff.hpp"
#include "lslu/gradcheck.hpp"
#include "lslu/optim.hpp"
#include "support.hpp"

using namespace lslu;
using lslu::testing::random_tensor;

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Reduces any tensor to a scalar with fixed random weights, so every output
// element gets a distinct upstream gradient.
Var probe(Tape& tape, Var y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = random_tensor(y.shape(), rng);
  return ops::sum(ops::mul(y, tape.constant(std::move(w))));
}

}  // namespace

TEST(Tensor, RejectsZeroSizedDimension) {
  EXPECT_THROW(Tensor({3, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
}

TEST(Tensor, GemmKernelsMatchNaiveProducts) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + uniform_index(rng, 7), k = 1 + uniform_index(rng, 7),
                      n = 1 + uniform_index(rng, 7);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    const Tensor ref = naive_matmul(a, b);
    EXPECT_LT(max_abs_diff(matmul(a, b), ref), 1e-12);

    Tensor c({m, n});
    const Tensor bt = transpose(b);
    kernels::gemm_nt(a.vec().data(), bt.vec().data(), c.vec().data(), m, k, n, false);
    EXPECT_LT(max_abs_diff(c, ref), 1e-12);

    Tensor c2({m, n});
    const Tensor at = transpose(a);
    kernels::gemm_tn(at.vec().data(), b.vec().data(), c2.vec().data(), k, m, n, false);
    EXPECT_LT(max_abs_diff(c2, ref), 1e-12);
  }
}

TEST(Tensor, LogSumExpIsStable) {
  std::vector<double> v{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(v), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Random, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(uniform01(a), uniform01(b));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(Random, UniformIndexCoversRange) {
  Rng rng(1);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[uniform_index(rng, 5)];
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
}

TEST(Autodiff, BackwardRequiresScalarAndSingleUse) {
  ParameterStore s;
  auto& p = s.add("w", Tensor({2, 2}, 1.0));
  Tape tape;
  Var x = tape.param(p);
  EXPECT_THROW(tape.backward(x), ShapeError);
  Var l = ops::sum(x);
  tape.backward(l);
  EXPECT_THROW(tape.backward(l), ValueError);
  ASSERT_TRUE(p.has_grad());
  for (double g : p.grad.vec()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, FrozenParametersGetNoGradient) {
  ParameterStore s;
  auto& w = s.add("w", Tensor({2, 2}, 1.0));
  auto& f = s.add("f", Tensor({2, 2}, 2.0), false);
  Tape tape;
  tape.backward(ops::sum(ops::mul(tape.param(w), tape.param(f))));
  EXPECT_TRUE(w.has_grad());
  EXPECT_FALSE(f.has_grad());
}

TEST(Autodiff, GradientsAccumulateForSharedParameter) {
  ParameterStore s;
  auto& w = s.add("w", Tensor({1, 3}, 2.0));
  Tape tape;
  Var x = tape.param(w);
  tape.backward(ops::sum(ops::add(x, x)));
  for (double g : w.grad.vec()) EXPECT_EQ(g, 2.0);
}

TEST(Autodiff, MaskedSoftmaxGivesExactZeros) {
  Tape tape;
  Var x = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  std::vector<std::uint8_t> mask{1, 0, 1};
  const auto& y = ops::softmax_rows(x, &mask).value();
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_EQ(y(1, 1), 0.0);
  EXPECT_NEAR(y(0, 0) + y(0, 2), 1.0, 1e-15);
}

TEST(Autodiff, DropoutIsIdentityInEvalAndScaledInTrain) {
  Rng rng(5);
  Tape tape;
  Tensor ones({50, 40}, 1.0);
  Var x = tape.constant(ones);
  EXPECT_EQ(ops::dropout(x, 0.5, rng, false).value(), ones);
  const auto& y = ops::dropout(x, 0.25, rng, true).value();
  double sum = 0.0;
  for (double v : y.vec()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
    sum += v;
  }
  EXPECT_NEAR(sum / static_cast<double>(y.size()), 1.0, 0.05);
  EXPECT_THROW(ops::dropout(x, 1.0, rng, true), ConfigError);
}

TEST(Autodiff, EmbeddingRejectsOutOfRangeId) {
  Tape tape;
  Var table = tape.constant(Tensor({4, 2}, 1.0));
  EXPECT_THROW(ops::embedding(table, {0, 4}), ValueError);
}

// Each op against central differences, several seeds.
class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed);
  ParameterStore s;
  auto& a = s.add("a", random_tensor({3, 4}, rng));
  auto& b = s.add("b", random_tensor({4, 5}, rng));
  auto& c = s.add("c", random_tensor({3, 4}, rng));
  auto& bias = s.add("bias", random_tensor({4}, rng));
  auto& g = s.add("gamma", random_tensor({4}, rng));
  auto& w = s.add("mix", random_tensor({1, 3}, rng));
  auto& sc = s.add("scale", random_tensor({1}, rng));
  std::vector<std::uint8_t> mask{1, 1, 0, 1};

  const std::vector<std::pair<const char*, std::function<Var(Tape&)>>> cases = {
      {"matmul", [&](Tape& t) { return probe(t, ops::matmul(t.param(a), t.param(b)), seed); }},
      {"matmul_nt", [&](Tape& t) { return probe(t, ops::matmul_nt(t.param(a), t.param(c)), seed); }},
      {"add_sub_mul",
       [&](Tape& t) {
         Var x = ops::mul(ops::add(t.param(a), t.param(c)), ops::sub(t.param(a), t.param(c)));
         return probe(t, x, seed);
       }},
      {"bias_scale", [&](Tape& t) { return probe(t, ops::scale(ops::add_bias(t.param(a), t.param(bias)), 0.7), seed); }},
      {"tanh_sigmoid_gelu",
       [&](Tape& t) {
         Var x = t.param(a);
         return probe(t, ops::add(ops::tanh(x), ops::mul(ops::sigmoid(x), ops::gelu(x))), seed);
       }},
      {"softmax_masked", [&](Tape& t) { return probe(t, ops::softmax_rows(t.param(a), &mask), seed); }},
      {"log_sum_exp", [&](Tape& t) { return probe(t, ops::log_sum_exp(t.param(a), 1), seed); }},
      {"layer_norm",
       [&](Tape& t) { return probe(t, ops::layer_norm(t.param(a), t.param(g), t.param(bias)), seed); }},
      {"embedding", [&](Tape& t) { return probe(t, ops::embedding(t.param(a), {2, 0, 2}), seed); }},
      {"concat_slice",
       [&](Tape& t) {
         Var x = ops::concat_cols({t.param(a), t.param(c)});
         Var y = ops::concat_rows({ops::slice_rows(x, 1, 3), ops::concat_cols({t.param(a), t.param(a)})});
         return probe(t, ops::slice_cols(y, 2, 7), seed);
       }},
      {"mean_rows", [&](Tape& t) { return probe(t, ops::mean_rows(t.param(a)), seed); }},
      {"cross_entropy",
       [&](Tape& t) { return ops::cross_entropy(t.param(a), {1, ops::kIgnore, 3}); }},
      {"weighted_sum_scale",
       [&](Tape& t) {
         Var mix = ops::weighted_sum({t.param(a), t.param(c), ops::tanh(t.param(a))},
                                     ops::softmax_rows(t.param(w)));
         return probe(t, ops::scale_by(mix, t.param(sc)), seed);
       }},
      {"reshape", [&](Tape& t) { return probe(t, ops::reshape(t.param(a), {2, 6}), seed); }},
  };
  for (const auto& [name, fn] : cases) {
    const auto report = finite_difference_check(fn, {&s});
    EXPECT_LT(report.max_rel_err(), 1e-6) << name;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradients, ::testing::Range(1, 11));

TEST(Adam, FirstStepMovesByLearningRateAlongSign) {
  ParameterStore s;
  auto& p = s.add("p", Tensor::row({1.0, -2.0, 0.5}));
  p.grad = Tensor::row({0.3, -4.0, 1e-3});
  Adam adam(AdamConfig{0.01});
  adam.step(s);
  // bias-corrected m/sqrt(v) = g/|g| on the first step
  EXPECT_NEAR(p.value[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.value[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(p.value[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-12);
  EXPECT_FALSE(p.has_grad());
}

TEST(Adam, MatchesReferenceRecurrenceOverSeveralSteps) {
  ParameterStore s;
  auto& p = s.add("p", Tensor({1}, 1.0));
  Adam adam(AdamConfig{0.1});
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * x;  // d/dx x^2
    p.grad = Tensor({1}, 2.0 * p.value[0]);
    adam.step(s);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value[0], x, 1e-12);
  }
}

TEST(Adam, NeverWritesFrozenParametersAndRequiresGrads) {
  ParameterStore s;
  auto& w = s.add("w", Tensor({2}, 1.0));
  auto& f = s.add("f", Tensor({2}, 1.0), false);
  f.grad = Tensor({2}, 5.0);
  Adam adam;
  EXPECT_THROW(adam.step(s), ValueError);  // w has no grad
  w.grad = Tensor({2}, 1.0);
  adam.step(s);
  EXPECT_EQ(f.value, Tensor({2}, 1.0));
  EXPECT_NE(w.value, Tensor({2}, 1.0));
}

TEST(GradCheck, FlagsAWrongGradient) {
  ParameterStore s;
  s.add("x", Tensor::row({0.3, -0.2}));
  // op whose backward is deliberately off by a factor of two
  auto bad = [&](Tape& t) {
    Var x = t.param(s.at("x"));
    Tensor y = x.value();
    for (auto& v : y.vec()) v = v * v;
    Var out = t.record(std::move(y), {x}, [x](Tape& tp, const Tensor& g) {
      auto* gx = tp.grad_of(x);
      const auto& X = tp.value(x.id);
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * 4.0 * X[i];
    });
    return ops::sum(out);
  };
  EXPECT_GT(finite_difference_check(bad, {&s}).max_rel_err(), 0.4);
}
