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
#include <functional>
#include <string>
#include <vector>

#include "lslu/autodiff.hpp"
#include "lslu/random.hpp"

namespace lslu {

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_abs_grad = 0.0;
  double max_abs_err = 0.0;
  /// max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf) over the
  /// checked elements of this parameter. Gradients below `abs_floor` in
  /// magnitude count as zero.
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.rel_err);
    return m;
  }
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Elements sampled per parameter (0 = all).
  std::size_t max_elements = 0;
  std::uint64_t seed = 1;
  double abs_floor = 1e-5;
};

/// Compares tape gradients of `loss_fn` against central differences for every
/// trainable parameter in `stores`. `loss_fn` must be deterministic.
inline GradCheckReport finite_difference_check(
    const std::function<Var(Tape&)>& loss_fn,
    const std::vector<ParameterStore*>& stores, GradCheckOptions opt = {}) {
  for (auto* s : stores) s->zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape);
    tape.backward(loss);
  }
  auto eval = [&loss_fn]() {
    Tape tape;
    return loss_fn(tape).value().item();
  };
  Rng rng(opt.seed);
  GradCheckReport report;
  for (auto* s : stores) {
    for (auto& p : *s) {
      if (!p.trainable) continue;
      GradCheckEntry e;
      e.name = p.name;
      const Tensor analytic =
          p.has_grad() ? p.grad : Tensor(p.value.shape(), 0.0);
      std::vector<std::size_t> idx(p.value.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      if (opt.max_elements && idx.size() > opt.max_elements) {
        shuffle(idx, rng);
        idx.resize(opt.max_elements);
      }
      double max_num = 0.0;
      for (std::size_t i : idx) {
        const double orig = p.value[i];
        p.value[i] = orig + opt.eps;
        const double fp = eval();
        p.value[i] = orig - opt.eps;
        const double fm = eval();
        p.value[i] = orig;
        const double num = (fp - fm) / (2.0 * opt.eps);
        e.max_abs_grad = std::max(e.max_abs_grad, std::abs(analytic[i]));
        max_num = std::max(max_num, std::abs(num));
        e.max_abs_err = std::max(e.max_abs_err, std::abs(analytic[i] - num));
        ++e.checked;
      }
      const double denom = std::max(e.max_abs_grad, max_num);
      e.rel_err = e.max_abs_err / std::max(denom, opt.abs_floor);
      report.entries.push_back(e);
    }
  }
  for (auto* s : stores) s->zero_grad();
  return report;
}

}  // namespace lslu
