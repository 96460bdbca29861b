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
#include <deque>
#include <functional>
#include <vector>

#include "lslu/crf.hpp"
#include "lslu/random.hpp"
#include "lslu/tensor.hpp"

namespace lslu::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = normal(rng, 0.0, scale);
  return t;
}

/// Every label path of length T over K labels, in lexicographic order.
inline std::vector<std::vector<int>> all_paths(std::size_t T, std::size_t K) {
  std::vector<std::vector<int>> out;
  std::vector<int> p(T, 0);
  while (true) {
    out.push_back(p);
    std::size_t i = T;
    while (i > 0) {
      --i;
      if (static_cast<std::size_t>(++p[i]) < K) break;
      p[i] = 0;
      if (i == 0) return out;
    }
    if (T == 0) return out;
  }
}

/// Path score written out directly from the definition.
inline double naive_score(const Tensor& E, const Tensor& A, const Tensor& S, const Tensor& P,
                          const std::vector<int>& y) {
  double s = S[static_cast<std::size_t>(y[0])] + P[static_cast<std::size_t>(y.back())];
  for (std::size_t t = 0; t < y.size(); ++t) s += E(t, static_cast<std::size_t>(y[t]));
  for (std::size_t t = 0; t + 1 < y.size(); ++t)
    s += A(static_cast<std::size_t>(y[t]), static_cast<std::size_t>(y[t + 1]));
  return s;
}

struct BruteForce {
  double log_z = 0.0;
  double best = -INFINITY;
  std::vector<int> best_path;
};

inline BruteForce enumerate_crf(const Tensor& E, const Tensor& A, const Tensor& S, const Tensor& P) {
  BruteForce b;
  std::vector<double> scores;
  for (const auto& y : all_paths(E.rows(), E.cols())) {
    const double s = naive_score(E, A, S, P, y);
    scores.push_back(s);
    if (s > b.best) {
      b.best = s;
      b.best_path = y;
    }
  }
  double m = -INFINITY;
  for (double s : scores) m = std::max(m, s);
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - m);
  b.log_z = m + std::log(acc);
  return b;
}

/// Shortest edit scripts by breadth-first search over every string of
/// length <= max_len on a small alphabet. One edge per single insertion,
/// deletion or substitution; no dynamic programming involved.
class EditGraph {
 public:
  EditGraph(int alphabet, std::size_t max_len) : k_(alphabet), max_len_(max_len) {
    std::size_t count = 1;
    offset_.push_back(0);
    for (std::size_t len = 0; len <= max_len; ++len) {
      offset_.push_back(offset_.back() + count);
      count *= static_cast<std::size_t>(k_);
    }
    for (std::size_t id = 0; id < offset_.back(); ++id) strings_.push_back(decode(id));
  }

  std::size_t size() const { return strings_.size(); }
  const std::vector<int>& string(std::size_t id) const { return strings_[id]; }

  std::size_t index(const std::vector<int>& s) const {
    std::size_t v = 0;
    for (int c : s) v = v * static_cast<std::size_t>(k_) + static_cast<std::size_t>(c);
    return offset_[s.size()] + v;
  }

  /// Distance from `source` to every string in the graph.
  std::vector<int> distances(std::size_t source) const {
    std::vector<int> dist(size(), -1);
    std::deque<std::size_t> q{source};
    dist[source] = 0;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop_front();
      for (std::size_t v : neighbors(strings_[u]))
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push_back(v);
        }
    }
    return dist;
  }

 private:
  std::vector<int> decode(std::size_t id) const {
    std::size_t len = 0;
    while (offset_[len + 1] <= id) ++len;
    std::size_t v = id - offset_[len];
    std::vector<int> s(len);
    for (std::size_t i = len; i-- > 0;) {
      s[i] = static_cast<int>(v % static_cast<std::size_t>(k_));
      v /= static_cast<std::size_t>(k_);
    }
    return s;
  }

  std::vector<std::size_t> neighbors(const std::vector<int>& s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto d = s;
      d.erase(d.begin() + static_cast<std::ptrdiff_t>(i));
      out.push_back(index(d));
      for (int c = 0; c < k_; ++c)
        if (c != s[i]) {
          auto t = s;
          t[i] = c;
          out.push_back(index(t));
        }
    }
    if (s.size() < max_len_)
      for (std::size_t i = 0; i <= s.size(); ++i)
        for (int c = 0; c < k_; ++c) {
          auto t = s;
          t.insert(t.begin() + static_cast<std::ptrdiff_t>(i), c);
          out.push_back(index(t));
        }
    return out;
  }

  int k_;
  std::size_t max_len_;
  std::vector<std::size_t> offset_;
  std::vector<std::vector<int>> strings_;
};

}  // namespace lslu::testing
