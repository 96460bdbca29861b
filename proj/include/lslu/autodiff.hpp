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
#include <cstdint>
#include <deque>
#include <functional>
#include <numbers>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lslu/error.hpp"
#include "lslu/random.hpp"
#include "lslu/tensor.hpp"

namespace lslu {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // empty until a backward pass reaches this parameter
  bool trainable = true;

  bool has_grad() const { return !grad.empty(); }
};

/// Named parameter collection with stable element addresses and insertion
/// order (the order is the checkpoint order).
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true) {
    if (index_.count(name))
      throw ValueError("parameter '" + name + "' already registered");
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{name, std::move(value), Tensor{}, trainable});
    return params_.back();
  }

  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Parameter* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  Parameter& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw ValueError("no parameter named '" + name + "'");
  }
  const Parameter& at(const std::string& name) const {
    if (auto* p = find(name)) return *p;
    throw ValueError("no parameter named '" + name + "'");
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void set_trainable(bool trainable) {
    for (auto& p : params_) p.trainable = trainable;
  }
  bool all_frozen() const {
    for (const auto& p : params_)
      if (p.trainable) return false;
    return true;
  }
  void zero_grad() {
    for (auto& p : params_) p.grad = Tensor{};
  }

  /// FNV-1a over names and raw value bytes; equal iff bitwise identical
  /// (up to hash collisions).
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& p : params_) {
      mix(p.name.data(), p.name.size());
      mix(p.value.data().data(), p.value.size() * sizeof(double));
    }
    return h;
  }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
};

/// Records operations in execution order (which is topological by
/// construction) and replays their backward rules in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf for a parameter. Trainable parameters require grad; frozen ones are
  /// recorded as constants. Repeated calls return the same node.
  Var param(Parameter& p) {
    check_live();
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end())
      return Var{this, it->second};
    Node n;
    n.ref = &p.value;
    n.requires_grad = p.trainable;
    n.param = p.trainable ? &p : nullptr;
    nodes_.push_back(std::move(n));
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var{this, nodes_.size() - 1};
  }

  /// Read-only view of a parameter: always recorded as a constant.
  Var param(const Parameter& p) { return constant_ref(p.value); }

  Var constant(Tensor t) {
    check_live();
    Node n;
    n.own = std::move(t);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  /// Constant that aliases caller-owned storage; it must outlive the tape.
  Var constant_ref(const Tensor& t) {
    check_live();
    Node n;
    n.ref = &t;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  /// Free leaf requiring grad (used by gradient checks on raw inputs).
  Var variable(Tensor t) {
    check_live();
    Node n;
    n.own = std::move(t);
    n.requires_grad = true;
    n.leaf = true;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
  }

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    check_live();
    bool rg = false;
    for (const auto& v : inputs) {
      if (v.tape != this) throw ValueError("tape: input recorded on another tape");
      rg = rg || nodes_[v.id].requires_grad;
    }
    Node n;
    n.own = std::move(value);
    n.requires_grad = rg;
    if (rg) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].get(); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of an input, allocated on first use; null when the
  /// input does not require grad.
  Tensor* grad_of(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor(n.get().shape());
    return &n.grad;
  }

  /// Gradient of a `variable` leaf after backward (zeros if unreached).
  Tensor leaf_grad(Var v) const {
    auto it = leaf_grads_.find(v.id);
    if (it == leaf_grads_.end()) throw ValueError("leaf_grad: no gradient recorded");
    return it->second;
  }

  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Populates Parameter::grad (accumulating) for every trainable parameter
  /// reachable from `loss`, then releases the recorded graph.
  void backward(Var loss) {
    if (consumed_) throw ValueError("backward: tape already consumed");
    if (loss.tape != this) throw ValueError("backward: loss not on this tape");
    if (value(loss.id).size() != 1)
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(value(loss.id).shape()));
    consumed_ = true;
    if (nodes_[loss.id].requires_grad) {
      nodes_[loss.id].grad = Tensor(value(loss.id).shape(), 1.0);
      for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty()) continue;
        if (n.backward) {
          Tensor g = std::move(n.grad);
          n.backward(*this, g);
        } else if (n.leaf) {
          leaf_grads_[i] = std::move(n.grad);
        } else if (n.param) {
          if (n.param->grad.empty())
            n.param->grad = std::move(n.grad);
          else
            for (std::size_t k = 0; k < n.grad.size(); ++k)
              n.param->grad[k] += n.grad[k];
        }
      }
    }
    nodes_.clear();
    param_nodes_.clear();
  }

 private:
  struct Node {
    Tensor own;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = false;
    Parameter* param = nullptr;
    BackwardFn backward;
    const Tensor& get() const { return ref ? *ref : own; }
  };

  void check_live() const {
    if (consumed_) throw ValueError("tape: recording on a consumed tape");
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::unordered_map<std::size_t, Tensor> leaf_grads_;
  bool consumed_ = false;
};

inline const Tensor& Var::value() const { return tape->value(id); }
inline bool Var::requires_grad() const { return tape->requires_grad(id); }

// ---------------------------------------------------------------------------
// Differentiable primitives. Shapes are 2-D [rows x cols] unless noted; a
// "row vector" is [1 x n] or [n].
namespace ops {

namespace detail {
inline void same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape)
    throw ValueError(std::string(op) + ": operands recorded on different tapes");
}
inline void require_2d(const Var& a, const char* op) {
  if (a.value().ndim() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_str(a.shape()));
}
inline void add_into(Tensor* dst, const Tensor& src) {
  if (!dst) return;
  for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += src[i];
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::same_tape(a, b, "matmul");
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_str(A.shape()) +
                     " and " + shape_str(B.shape()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C({m, n});
  kernels::gemm_nn(A.data().data(), B.data().data(), C.data().data(), m, k, n,
                   false);
  return a.tape->record(std::move(C), {a, b},
                        [a, b, m, k, n](Tape& t, const Tensor& g) {
                          const auto& A = t.value(a.id);
                          const auto& B = t.value(b.id);
                          if (auto* ga = t.grad_of(a))
                            kernels::gemm_nt(g.data().data(), B.data().data(),
                                             ga->data().data(), m, n, k, true);
                          if (auto* gb = t.grad_of(b))
                            kernels::gemm_tn(A.data().data(), g.data().data(),
                                             gb->data().data(), m, k, n, true);
                        });
}

/// a · bᵀ
inline Var matmul_nt(Var a, Var b) {
  detail::same_tape(a, b, "matmul_nt");
  detail::require_2d(a, "matmul_nt");
  detail::require_2d(b, "matmul_nt");
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.cols())
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(A.shape()) +
                     " and " + shape_str(B.shape()) + "^T");
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor C({m, n});
  kernels::gemm_nt(A.data().data(), B.data().data(), C.data().data(), m, k, n,
                   false);
  return a.tape->record(std::move(C), {a, b},
                        [a, b, m, k, n](Tape& t, const Tensor& g) {
                          const auto& A = t.value(a.id);
                          const auto& B = t.value(b.id);
                          // dA = g·B, dB = gᵀ·A
                          if (auto* ga = t.grad_of(a))
                            kernels::gemm_nn(g.data().data(), B.data().data(),
                                             ga->data().data(), m, n, k, true);
                          if (auto* gb = t.grad_of(b))
                            kernels::gemm_tn(g.data().data(), A.data().data(),
                                             gb->data().data(), m, n, k, true);
                        });
}

inline Var add(Var a, Var b) {
  detail::same_tape(a, b, "add");
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor c = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += B[i];
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, const Tensor& g) {
    detail::add_into(t.grad_of(a), g);
    detail::add_into(t.grad_of(b), g);
  });
}

inline Var sub(Var a, Var b) {
  detail::same_tape(a, b, "sub");
  if (a.shape() != b.shape())
    throw ShapeError("sub: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor c = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= B[i];
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, const Tensor& g) {
    detail::add_into(t.grad_of(a), g);
    if (auto* gb = t.grad_of(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

inline Var mul(Var a, Var b) {
  detail::same_tape(a, b, "mul");
  if (a.shape() != b.shape())
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor c = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= B[i];
  return a.tape->record(std::move(c), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const auto& A = t.value(a.id);
    const auto& B = t.value(b.id);
    if (auto* ga = t.grad_of(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * B[i];
    if (auto* gb = t.grad_of(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * A[i];
  });
}

inline Var scale(Var a, double s) {
  Tensor c = a.value();
  for (auto& v : c.vec()) v *= s;
  return a.tape->record(std::move(c), {a}, [a, s](Tape& t, const Tensor& g) {
    if (auto* ga = t.grad_of(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  });
}

/// x[T x n] + bias broadcast over rows; bias is [n] or [1 x n].
inline Var add_bias(Var x, Var bias) {
  detail::same_tape(x, bias, "add_bias");
  detail::require_2d(x, "add_bias");
  const auto& X = x.value();
  const auto& B = bias.value();
  if (B.size() != X.cols())
    throw ShapeError("add_bias: bias " + shape_str(B.shape()) +
                     " does not match input " + shape_str(X.shape()));
  Tensor c = X;
  const std::size_t n = X.cols();
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t j = 0; j < n; ++j) c(r, j) += B[j];
  return x.tape->record(std::move(c), {x, bias},
                        [x, bias, n](Tape& t, const Tensor& g) {
                          detail::add_into(t.grad_of(x), g);
                          if (auto* gb = t.grad_of(bias))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*gb)[i % n] += g[i];
                        });
}

template <typename F, typename DF>
Var unary(Var a, F f, DF df_from_xy) {
  const auto& A = a.value();
  Tensor y = A;
  for (auto& v : y.vec()) v = f(v);
  return a.tape->record(std::move(y), {a},
                        [a, df_from_xy](Tape& t, const Tensor& g) {
                          auto* ga = t.grad_of(a);
                          if (!ga) return;
                          const auto& X = t.value(a.id);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            (*ga)[i] += g[i] * df_from_xy(X[i]);
                        });
}

inline Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double y = std::tanh(x);
        return 1.0 - y * y;
      });
}

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  return unary(a, sigmoid_scalar, [](double x) {
    const double s = sigmoid_scalar(x);
    return s * (1.0 - s);
  });
}

/// Exact (erf) GELU.
inline Var gelu(Var a) {
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); },
      [](double x) {
        const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
        const double pdf =
            std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + x * pdf;
      });
}

namespace detail {
inline void softmax_backward(const Tensor& y, const Tensor& g, Tensor* gx) {
  const std::size_t n = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += y(r, j) * g(r, j);
    for (std::size_t j = 0; j < n; ++j) (*gx)(r, j) += y(r, j) * (g(r, j) - dot);
  }
}
}  // namespace detail

/// Row-wise softmax; when `key_mask` is given, columns with mask 0 get
/// probability exactly zero.
inline Var softmax_rows(Var x, const std::vector<std::uint8_t>* key_mask = nullptr) {
  detail::require_2d(x, "softmax_rows");
  const auto& X = x.value();
  const std::size_t n = X.cols();
  if (key_mask && key_mask->size() != n)
    throw ShapeError("softmax_rows: mask length " +
                     std::to_string(key_mask->size()) + " vs " +
                     std::to_string(n) + " columns");
  Tensor y(X.shape());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double m = -INFINITY;
    for (std::size_t j = 0; j < n; ++j)
      if (!key_mask || (*key_mask)[j]) m = std::max(m, X(r, j));
    if (m == -INFINITY) continue;  // fully masked row
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (!key_mask || (*key_mask)[j]) s += (y(r, j) = std::exp(X(r, j) - m));
    for (std::size_t j = 0; j < n; ++j) y(r, j) /= s;
  }
  const std::size_t yid = x.tape->node_count();
  return x.tape->record(std::move(y), {x}, [x, yid](Tape& t, const Tensor& g) {
    if (auto* gx = t.grad_of(x)) detail::softmax_backward(t.value(yid), g, gx);
  });
}

/// log-sum-exp along `axis` (0: over rows -> [1 x cols], 1: over cols ->
/// [rows x 1]).
inline Var log_sum_exp(Var x, int axis = 1) {
  detail::require_2d(x, "log_sum_exp");
  if (axis != 0 && axis != 1)
    throw ShapeError("log_sum_exp: axis must be 0 or 1");
  const auto& X = x.value();
  const std::size_t R = X.rows(), C = X.cols();
  const std::size_t outer = axis == 1 ? R : C, inner = axis == 1 ? C : R;
  auto at = [&X, axis](std::size_t o, std::size_t i) {
    return axis == 1 ? X(o, i) : X(i, o);
  };
  Tensor y(axis == 1 ? Shape{R, 1} : Shape{1, C});
  for (std::size_t o = 0; o < outer; ++o) {
    double m = -INFINITY;
    for (std::size_t i = 0; i < inner; ++i) m = std::max(m, at(o, i));
    double s = 0.0;
    for (std::size_t i = 0; i < inner; ++i) s += std::exp(at(o, i) - m);
    y[o] = m + std::log(s);
  }
  const std::size_t yid = x.tape->node_count();
  return x.tape->record(
      std::move(y), {x}, [x, yid, axis, outer, inner](Tape& t, const Tensor& g) {
        auto* gx = t.grad_of(x);
        if (!gx) return;
        const auto& X = t.value(x.id);
        const auto& Y = t.value(yid);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t idx =
                axis == 1 ? o * X.cols() + i : i * X.cols() + o;
            (*gx)[idx] += g[o] * std::exp(X[idx] - Y[o]);
          }
      });
}

/// Per-row layer normalization with learned scale and shift ([n] each).
inline Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-6) {
  detail::same_tape(x, gamma, "layer_norm");
  detail::same_tape(x, beta, "layer_norm");
  detail::require_2d(x, "layer_norm");
  const auto& X = x.value();
  const std::size_t R = X.rows(), n = X.cols();
  if (gamma.value().size() != n || beta.value().size() != n)
    throw ShapeError("layer_norm: scale/shift " + shape_str(gamma.shape()) +
                     "/" + shape_str(beta.shape()) + " vs input " +
                     shape_str(X.shape()));
  const auto& G = gamma.value();
  const auto& B = beta.value();
  Tensor xhat(X.shape());
  std::vector<double> rstd(R);
  Tensor y(X.shape());
  for (std::size_t r = 0; r < R; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += X(r, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (X(r, j) - mean) * (X(r, j) - mean);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(r, j) = (X(r, j) - mean) * rstd[r];
      y(r, j) = G[j] * xhat(r, j) + B[j];
    }
  }
  return x.tape->record(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), R,
       n](Tape& t, const Tensor& g) {
        const auto& G = t.value(gamma.id);
        if (auto* gg = t.grad_of(gamma))
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t j = 0; j < n; ++j) (*gg)[j] += g(r, j) * xhat(r, j);
        if (auto* gb = t.grad_of(beta))
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g(r, j);
        if (auto* gx = t.grad_of(x)) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < R; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = g(r, j) * G[j];
              s1 += dxh;
              s2 += dxh * xhat(r, j);
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = g(r, j) * G[j];
              (*gx)(r, j) += rstd[r] * (dxh - inv_n * s1 - xhat(r, j) * inv_n * s2);
            }
          }
        }
      });
}

/// Gathers table rows: out[i] = table[ids[i]].
inline Var embedding(Var table, const std::vector<int>& ids, const char* what = "embedding") {
  detail::require_2d(table, "embedding");
  const auto& W = table.value();
  const std::size_t n = W.cols();
  Tensor y({ids.size(), n});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= W.rows())
      throw ValueError(std::string(what) + ": id " + std::to_string(ids[i]) +
                       " at index " + std::to_string(i) + " outside [0, " +
                       std::to_string(W.rows()) + ")");
    auto src = W.row_span(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), y.row_span(i).begin());
  }
  return table.tape->record(std::move(y), {table},
                            [table, ids, n](Tape& t, const Tensor& g) {
                              if (auto* gw = t.grad_of(table))
                                for (std::size_t i = 0; i < ids.size(); ++i)
                                  for (std::size_t j = 0; j < n; ++j)
                                    (*gw)(static_cast<std::size_t>(ids[i]), j) += g(i, j);
                            });
}

/// Concatenation along the last axis.
inline Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t R = xs[0].rows();
  std::size_t C = 0;
  std::vector<std::size_t> offs;
  for (const auto& v : xs) {
    detail::same_tape(xs[0], v, "concat_cols");
    if (v.rows() != R)
      throw ShapeError("concat_cols: row mismatch " + shape_str(xs[0].shape()) +
                       " vs " + shape_str(v.shape()));
    offs.push_back(C);
    C += v.cols();
  }
  Tensor y({R, C});
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& X = xs[k].value();
    for (std::size_t r = 0; r < R; ++r)
      std::copy(X.row_span(r).begin(), X.row_span(r).end(),
                y.row_span(r).begin() + static_cast<std::ptrdiff_t>(offs[k]));
  }
  return xs[0].tape->record(std::move(y), xs,
                            [xs, offs, R](Tape& t, const Tensor& g) {
                              for (std::size_t k = 0; k < xs.size(); ++k) {
                                auto* gx = t.grad_of(xs[k]);
                                if (!gx) continue;
                                const std::size_t c = gx->cols();
                                for (std::size_t r = 0; r < R; ++r)
                                  for (std::size_t j = 0; j < c; ++j)
                                    (*gx)(r, j) += g(r, offs[k] + j);
                              }
                            });
}

/// Stacks inputs vertically.
inline Var concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t C = xs[0].cols();
  std::size_t R = 0;
  std::vector<std::size_t> offs;
  for (const auto& v : xs) {
    detail::same_tape(xs[0], v, "concat_rows");
    if (v.cols() != C)
      throw ShapeError("concat_rows: column mismatch " +
                       shape_str(xs[0].shape()) + " vs " + shape_str(v.shape()));
    offs.push_back(R);
    R += v.rows();
  }
  Tensor y({R, C});
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& X = xs[k].value();
    std::copy(X.vec().begin(), X.vec().end(),
              y.vec().begin() + static_cast<std::ptrdiff_t>(offs[k] * C));
  }
  return xs[0].tape->record(std::move(y), xs,
                            [xs, offs, C](Tape& t, const Tensor& g) {
                              for (std::size_t k = 0; k < xs.size(); ++k) {
                                auto* gx = t.grad_of(xs[k]);
                                if (!gx) continue;
                                for (std::size_t i = 0; i < gx->size(); ++i)
                                  (*gx)[i] += g[offs[k] * C + i];
                              }
                            });
}

inline Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  detail::require_2d(x, "slice_rows");
  const auto& X = x.value();
  if (begin >= end || end > X.rows())
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + shape_str(X.shape()));
  const std::size_t C = X.cols();
  Tensor y({end - begin, C},
           std::vector<double>(X.vec().begin() + static_cast<std::ptrdiff_t>(begin * C),
                               X.vec().begin() + static_cast<std::ptrdiff_t>(end * C)));
  return x.tape->record(std::move(y), {x}, [x, begin, C](Tape& t, const Tensor& g) {
    if (auto* gx = t.grad_of(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[begin * C + i] += g[i];
  });
}

inline Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  detail::require_2d(x, "slice_cols");
  const auto& X = x.value();
  if (begin >= end || end > X.cols())
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + shape_str(X.shape()));
  const std::size_t R = X.rows(), w = end - begin;
  Tensor y({R, w});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < w; ++j) y(r, j) = X(r, begin + j);
  return x.tape->record(std::move(y), {x}, [x, begin, R, w](Tape& t, const Tensor& g) {
    if (auto* gx = t.grad_of(x))
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t j = 0; j < w; ++j) (*gx)(r, begin + j) += g(r, j);
  });
}

/// Inverted dropout; identity when !train or rate == 0.
inline Var dropout(Var x, double rate, Rng& rng, bool train) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout: rate " + std::to_string(rate) +
                      " outside [0, 1)");
  if (!train || rate == 0.0) return x;
  const auto& X = x.value();
  std::vector<double> keep(X.size());
  const double s = 1.0 / (1.0 - rate);
  Tensor y = X;
  for (std::size_t i = 0; i < X.size(); ++i) {
    keep[i] = uniform01(rng) >= rate ? s : 0.0;
    y[i] *= keep[i];
  }
  return x.tape->record(std::move(y), {x},
                        [x, keep = std::move(keep)](Tape& t, const Tensor& g) {
                          if (auto* gx = t.grad_of(x))
                            for (std::size_t i = 0; i < g.size(); ++i)
                              (*gx)[i] += g[i] * keep[i];
                        });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().vec()) s += v;
  return x.tape->record(Tensor({1, 1}, s), {x}, [x](Tape& t, const Tensor& g) {
    if (auto* gx = t.grad_of(x))
      for (auto& v : gx->vec()) v += g[0];
  });
}

/// Mean of rows -> [1 x cols].
inline Var mean_rows(Var x) {
  detail::require_2d(x, "mean_rows");
  const auto& X = x.value();
  const std::size_t R = X.rows(), C = X.cols();
  Tensor y({1, C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) y[j] += X(r, j) / static_cast<double>(R);
  return x.tape->record(std::move(y), {x}, [x, R, C](Tape& t, const Tensor& g) {
    if (auto* gx = t.grad_of(x))
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t j = 0; j < C; ++j)
          (*gx)(r, j) += g[j] / static_cast<double>(R);
  });
}

inline constexpr int kIgnore = -100;

/// Summed softmax cross-entropy over rows of `logits`; rows whose target is
/// kIgnore contribute nothing.
inline Var cross_entropy(Var logits, const std::vector<int>& targets) {
  detail::require_2d(logits, "cross_entropy");
  const auto& L = logits.value();
  const std::size_t R = L.rows(), C = L.cols();
  if (targets.size() != R)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(R) + " rows");
  double loss = 0.0;
  std::vector<double> lse(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    if (targets[r] == kIgnore) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= C)
      throw ValueError("cross_entropy: target " + std::to_string(targets[r]) +
                       " outside [0, " + std::to_string(C) + ")");
    lse[r] = lslu::log_sum_exp(L.row_span(r));
    loss += lse[r] - L(r, static_cast<std::size_t>(targets[r]));
  }
  return logits.tape->record(
      Tensor({1, 1}, loss), {logits},
      [logits, targets, lse = std::move(lse), R, C](Tape& t, const Tensor& g) {
        auto* gl = t.grad_of(logits);
        if (!gl) return;
        const auto& L = t.value(logits.id);
        for (std::size_t r = 0; r < R; ++r) {
          if (targets[r] == kIgnore) continue;
          for (std::size_t j = 0; j < C; ++j)
            (*gl)(r, j) += g[0] * std::exp(L(r, j) - lse[r]);
          (*gl)(r, static_cast<std::size_t>(targets[r])) -= g[0];
        }
      });
}

/// Σₖ weights[k] · layers[k]; weights is a [1 x K] (or [K]) variable.
inline Var weighted_sum(const std::vector<Var>& layers, Var weights) {
  if (layers.empty()) throw ShapeError("weighted_sum: no layers");
  const auto& W = weights.value();
  if (W.size() != layers.size())
    throw ShapeError("weighted_sum: " + std::to_string(W.size()) +
                     " weights for " + std::to_string(layers.size()) + " layers");
  Tensor y(layers[0].shape());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    detail::same_tape(layers[0], layers[k], "weighted_sum");
    if (layers[k].shape() != y.shape())
      throw ShapeError("weighted_sum: layer " + std::to_string(k) + " shape " +
                       shape_str(layers[k].shape()) + " vs " + shape_str(y.shape()));
    const auto& L = layers[k].value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += W[k] * L[i];
  }
  std::vector<Var> inputs = layers;
  inputs.push_back(weights);
  return weights.tape->record(std::move(y), inputs,
                              [layers, weights](Tape& t, const Tensor& g) {
                                const auto& W = t.value(weights.id);
                                auto* gw = t.grad_of(weights);
                                for (std::size_t k = 0; k < layers.size(); ++k) {
                                  const auto& L = t.value(layers[k].id);
                                  if (gw) {
                                    double s = 0.0;
                                    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * L[i];
                                    (*gw)[k] += s;
                                  }
                                  if (auto* gl = t.grad_of(layers[k]))
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                      (*gl)[i] += W[k] * g[i];
                                }
                              });
}

/// x · s for a single-element variable s.
inline Var scale_by(Var x, Var s) {
  detail::same_tape(x, s, "scale_by");
  if (s.value().size() != 1)
    throw ShapeError("scale_by: scale must have one element, got " +
                     shape_str(s.shape()));
  const double sv = s.value()[0];
  Tensor y = x.value();
  for (auto& v : y.vec()) v *= sv;
  return x.tape->record(std::move(y), {x, s}, [x, s](Tape& t, const Tensor& g) {
    const auto& X = t.value(x.id);
    const double sv = t.value(s.id)[0];
    if (auto* gs = t.grad_of(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * X[i];
      (*gs)[0] += acc;
    }
    if (auto* gx = t.grad_of(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += sv * g[i];
  });
}

/// Reinterprets the shape (same element count).
inline Var reshape(Var x, Shape shape) {
  if (shape_numel(shape) != x.value().size())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor y(std::move(shape), x.value().vec());
  return x.tape->record(std::move(y), {x}, [x](Tape& t, const Tensor& g) {
    detail::add_into(t.grad_of(x), g);
  });
}

}  // namespace ops
}  // namespace lslu
