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

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "lslu/autodiff.hpp"

namespace lslu {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global grad-norm clip; 0 disables
};

/// Adam with bias correction. Moment state is keyed by parameter address,
/// so one optimizer instance must stay paired with the stores it steps.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  /// Updates every trainable parameter in `stores` and clears all grads.
  /// Frozen parameters are never written.
  void step(const std::vector<ParameterStore*>& stores) {
    for (auto* s : stores)
      for (auto& p : *s)
        if (p.trainable && !p.has_grad())
          throw ValueError("adam: trainable parameter '" + p.name +
                           "' has no gradient");
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (auto* s : stores)
        for (auto& p : *s)
          if (p.trainable)
            for (double g : p.grad.vec()) sq += g * g;
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto* s : stores) {
      for (auto& p : *s) {
        if (!p.trainable) {
          p.grad = Tensor{};
          continue;
        }
        auto& st = state_[&p];
        if (st.m.empty()) {
          st.m.assign(p.value.size(), 0.0);
          st.v.assign(p.value.size(), 0.0);
        }
        auto& w = p.value.vec();
        const auto& g = p.grad.vec();
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = g[i] * scale;
          st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * gi;
          st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * gi * gi;
          const double mhat = st.m[i] / bc1;
          const double vhat = st.v[i] / bc2;
          w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.grad = Tensor{};
      }
    }
  }

  void step(ParameterStore& store) { step(std::vector<ParameterStore*>{&store}); }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::unordered_map<const Parameter*, Moments> state_;
};

}  // namespace lslu
