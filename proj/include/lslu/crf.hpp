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
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/tensor.hpp"

namespace lslu::crf {

// Linear-chain CRF over emissions [T x K], transitions [K x K] (from row
// label to column label), and start/stop boundary scores [K].
//
// score(y) = start[y0] + sum_t emit[t, y_t] + sum_t trans[y_t, y_t+1] + stop[y_T-1]

namespace detail {
inline void check(const Tensor& emissions, const Tensor& transitions,
                  const Tensor& start, const Tensor& stop, const char* op) {
  if (emissions.ndim() != 2)
    throw ShapeError(std::string(op) + ": emissions must be [T x K], got " +
                     shape_str(emissions.shape()));
  const std::size_t K = emissions.cols();
  if (transitions.rows() != K || transitions.cols() != K || start.size() != K ||
      stop.size() != K)
    throw ShapeError(std::string(op) + ": parameter shapes " +
                     shape_str(transitions.shape()) + ", " +
                     shape_str(start.shape()) + ", " + shape_str(stop.shape()) +
                     " do not match " + std::to_string(K) + " labels");
}
}  // namespace detail

inline double path_score(const Tensor& emissions, const Tensor& transitions,
                         const Tensor& start, const Tensor& stop,
                         const std::vector<int>& path) {
  detail::check(emissions, transitions, start, stop, "crf path_score");
  const std::size_t T = emissions.rows();
  if (path.size() != T)
    throw ShapeError("crf path_score: path length " + std::to_string(path.size()) +
                     " vs " + std::to_string(T) + " positions");
  const std::size_t K = emissions.cols();
  for (int y : path)
    if (y < 0 || static_cast<std::size_t>(y) >= K)
      throw ValueError("crf: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(K) + ")");
  double s = start[static_cast<std::size_t>(path[0])];
  for (std::size_t t = 0; t < T; ++t) {
    s += emissions(t, static_cast<std::size_t>(path[t]));
    if (t + 1 < T)
      s += transitions(static_cast<std::size_t>(path[t]),
                       static_cast<std::size_t>(path[t + 1]));
  }
  return s + stop[static_cast<std::size_t>(path[T - 1])];
}

/// Forward recursion in log space; alpha[t][k] is the log-sum of all prefixes
/// ending in label k at t (start included, stop excluded).
inline Tensor forward_alphas(const Tensor& emissions, const Tensor& transitions,
                             const Tensor& start) {
  const std::size_t T = emissions.rows(), K = emissions.cols();
  Tensor alpha({T, K});
  for (std::size_t k = 0; k < K; ++k) alpha(0, k) = start[k] + emissions(0, k);
  std::vector<double> buf(K);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < K; ++j) buf[j] = alpha(t - 1, j) + transitions(j, k);
      alpha(t, k) = log_sum_exp(buf) + emissions(t, k);
    }
  return alpha;
}

/// beta[t][k]: log-sum of all suffixes after position t given label k at t
/// (stop included).
inline Tensor backward_betas(const Tensor& emissions, const Tensor& transitions,
                             const Tensor& stop) {
  const std::size_t T = emissions.rows(), K = emissions.cols();
  Tensor beta({T, K});
  for (std::size_t k = 0; k < K; ++k) beta(T - 1, k) = stop[k];
  std::vector<double> buf(K);
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < K; ++j)
        buf[j] = transitions(k, j) + emissions(t + 1, j) + beta(t + 1, j);
      beta(t, k) = log_sum_exp(buf);
    }
  return beta;
}

inline double log_partition(const Tensor& emissions, const Tensor& transitions,
                            const Tensor& start, const Tensor& stop) {
  detail::check(emissions, transitions, start, stop, "crf log_partition");
  const std::size_t T = emissions.rows(), K = emissions.cols();
  if (T == 0) throw ShapeError("crf log_partition: empty sequence");
  const Tensor alpha = forward_alphas(emissions, transitions, start);
  std::vector<double> last(K);
  for (std::size_t k = 0; k < K; ++k) last[k] = alpha(T - 1, k) + stop[k];
  return log_sum_exp(last);
}

struct Decoded {
  std::vector<int> path;
  double score = 0.0;
};

/// Max-scoring path. On ties the lowest label index wins, both for the final
/// label and at every back-pointer.
inline Decoded viterbi(const Tensor& emissions, const Tensor& transitions,
                       const Tensor& start, const Tensor& stop) {
  detail::check(emissions, transitions, start, stop, "crf viterbi");
  const std::size_t T = emissions.rows(), K = emissions.cols();
  if (T == 0) throw ShapeError("crf viterbi: empty sequence");
  Tensor delta({T, K});
  std::vector<std::vector<int>> back(T, std::vector<int>(K, 0));
  for (std::size_t k = 0; k < K; ++k) delta(0, k) = start[k] + emissions(0, k);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k) {
      double best = -INFINITY;
      int arg = 0;
      for (std::size_t j = 0; j < K; ++j) {
        const double v = delta(t - 1, j) + transitions(j, k);
        if (v > best) {
          best = v;
          arg = static_cast<int>(j);
        }
      }
      delta(t, k) = best + emissions(t, k);
      back[t][k] = arg;
    }
  Decoded out;
  out.path.assign(T, 0);
  double best = -INFINITY;
  for (std::size_t k = 0; k < K; ++k) {
    const double v = delta(T - 1, k) + stop[k];
    if (v > best) {
      best = v;
      out.path[T - 1] = static_cast<int>(k);
    }
  }
  out.score = best;
  for (std::size_t t = T - 1; t > 0; --t)
    out.path[t - 1] = back[t][static_cast<std::size_t>(out.path[t])];
  return out;
}

/// Negative log-likelihood of `gold` as a differentiable op:
/// log Z - score(gold). Gradients are marginals minus gold indicators,
/// computed with forward-backward.
inline Var nll(Var emissions, Var transitions, Var start, Var stop,
               const std::vector<int>& gold) {
  const auto& E = emissions.value();
  const auto& A = transitions.value();
  const auto& S = start.value();
  const auto& P = stop.value();
  detail::check(E, A, S, P, "crf nll");
  const std::size_t T = E.rows(), K = E.cols();
  if (T == 0) throw ShapeError("crf nll: empty sequence");
  const double logz = log_partition(E, A, S, P);
  const double gold_score = path_score(E, A, S, P, gold);
  return emissions.tape->record(
      Tensor({1, 1}, logz - gold_score), {emissions, transitions, start, stop},
      [emissions, transitions, start, stop, gold, logz, T, K](Tape& t,
                                                              const Tensor& g) {
        const auto& E = t.value(emissions.id);
        const auto& A = t.value(transitions.id);
        const auto& S = t.value(start.id);
        const auto& P = t.value(stop.id);
        const Tensor alpha = forward_alphas(E, A, S);
        const Tensor beta = backward_betas(E, A, P);
        const double gs = g[0];
        auto* gE = t.grad_of(emissions);
        auto* gA = t.grad_of(transitions);
        auto* gS = t.grad_of(start);
        auto* gP = t.grad_of(stop);
        for (std::size_t i = 0; i < T; ++i)
          for (std::size_t k = 0; k < K; ++k) {
            const double marg = std::exp(alpha(i, k) + beta(i, k) - logz);
            if (gE) (*gE)(i, k) += gs * marg;
            if (i == 0 && gS) (*gS)[k] += gs * marg;
            if (i == T - 1 && gP) (*gP)[k] += gs * marg;
          }
        if (gA)
          for (std::size_t i = 0; i + 1 < T; ++i)
            for (std::size_t a = 0; a < K; ++a)
              for (std::size_t b = 0; b < K; ++b)
                (*gA)(a, b) += gs * std::exp(alpha(i, a) + A(a, b) +
                                             E(i + 1, b) + beta(i + 1, b) - logz);
        const auto y = [&gold](std::size_t i) { return static_cast<std::size_t>(gold[i]); };
        for (std::size_t i = 0; i < T; ++i) {
          if (gE) (*gE)(i, y(i)) -= gs;
          if (i + 1 < T && gA) (*gA)(y(i), y(i + 1)) -= gs;
        }
        if (gS) (*gS)[y(0)] -= gs;
        if (gP) (*gP)[y(T - 1)] -= gs;
      });
}

}  // namespace lslu::crf
