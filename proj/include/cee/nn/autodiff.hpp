#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/nn/kernels.hpp"
#include "cee/nn/tensor.hpp"

namespace cee::nn {

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
};

/**
 * Reverse-mode tape over tensor-valued nodes.
 *
 * Each forward call records onto its own tape; the tape is discarded after
 * a single backward pass. Nodes are stored in creation order, which is a
 * topological order, so backward is a reverse sweep.
 */
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, {}); }

  Var<T> variable(Tensor<T> value) { return push(std::move(value), true, {}); }

  /// Leaf that aliases external storage; `ref` must outlive the tape.
  Var<T> parameter(const Tensor<T>& ref) {
    Node n;
    n.external = &ref;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn) {
    Node n;
    n.own = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return value(v.id); }
  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.own;
  }

  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer for node `id`, allocated as zeros on first touch.
  Tensor<T>& grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape(), T{0});
    return n.grad;
  }

  /// Gradient of the last backward root w.r.t. `v` (zeros if unreached).
  Tensor<T> grad(Var<T> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor<T>(value(v.id).shape(), T{0});
    return n.grad;
  }

  void backward(Var<T> root) {
    if (root.tape != this) throw UsageError("backward root belongs to a different tape");
    if (value(root).size() != 1) {
      throw UsageError("backward requires a scalar output, got shape " +
                       shape_string(value(root).shape()));
    }
    if (backward_done_) throw UsageError("tape already consumed by a backward pass");
    backward_done_ = true;
    grad_ref(root.id)[0] = T{1};
    for (std::size_t id = root.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

namespace detail {

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape || a.tape == nullptr) throw UsageError("operands recorded on different tapes");
  return *a.tape;
}

inline std::size_t broadcast_dim(std::size_t a, std::size_t b) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ConfigError("incompatible broadcast dimensions " + std::to_string(a) + " and " +
                    std::to_string(b));
}

/// Sum `g` (rows x cols) down onto a tensor of shape `target` (broadcast source).
template <typename T>
void reduce_into(const Tensor<T>& g, Tensor<T>& target) {
  const std::size_t R = g.rows(), C = g.cols();
  const std::size_t tr = target.rows(), tc = target.cols();
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      target[(tr == 1 ? 0 : r) * tc + (tc == 1 ? 0 : c)] += g(r, c);
    }
  }
}

template <typename T, typename F, typename GA, typename GB>
Var<T> binary(Var<T> a, Var<T> b, F f, GA dfa, GB dfb) {
  Tape<T>& tape = same_tape(a, b);
  const Tensor<T>& A = tape.value(a);
  const Tensor<T>& B = tape.value(b);
  const std::size_t R = broadcast_dim(A.rows(), B.rows());
  const std::size_t C = broadcast_dim(A.cols(), B.cols());
  auto at = [](const Tensor<T>& t, std::size_t r, std::size_t c) {
    return t[(t.rows() == 1 ? 0 : r) * t.cols() + (t.cols() == 1 ? 0 : c)];
  };
  Tensor<T> out(R, C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out(r, c) = f(at(A, r, c), at(B, r, c));
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  const std::size_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), rg, [ia, ib, R, C, at, dfa, dfb](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad_ref(self);
    const Tensor<T>& A = t.value(ia);
    const Tensor<T>& B = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor<T> ga(R, C);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) ga(r, c) = g(r, c) * dfa(at(A, r, c), at(B, r, c));
      reduce_into(ga, t.grad_ref(ia));
    }
    if (t.requires_grad(ib)) {
      Tensor<T> gb(R, C);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) gb(r, c) = g(r, c) * dfb(at(A, r, c), at(B, r, c));
      reduce_into(gb, t.grad_ref(ib));
    }
  });
}

/// Elementwise map with derivative expressed from (input, output).
template <typename T, typename F, typename D>
Var<T> unary(Var<T> a, F f, D df) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = tape.value(a);
  Tensor<T> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = f(A[i]);
  const std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a), [ia, df](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad_ref(self);
    const Tensor<T>& A = t.value(ia);
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& ga = t.grad_ref(ia);
    for (std::size_t i = 0; i < A.size(); ++i) ga[i] += g[i] * df(A[i], Y[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> operator+(Var<T> a, Var<T> b) {
  return detail::binary(a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
                        [](T, T) { return T{1}; });
}

template <typename T>
Var<T> operator-(Var<T> a, Var<T> b) {
  return detail::binary(a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
                        [](T, T) { return T{-1}; });
}

template <typename T>
Var<T> operator*(Var<T> a, Var<T> b) {
  return detail::binary(a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
                        [](T x, T) { return x; });
}

/// Elementwise minimum; ties send the gradient to the left operand.
template <typename T>
Var<T> minimum(Var<T> a, Var<T> b) {
  return detail::binary(a, b, [](T x, T y) { return x <= y ? x : y; },
                        [](T x, T y) { return x <= y ? T{1} : T{0}; },
                        [](T x, T y) { return x <= y ? T{0} : T{1}; });
}

/// Elementwise maximum; ties send the gradient to the left operand.
template <typename T>
Var<T> maximum(Var<T> a, Var<T> b) {
  return detail::binary(a, b, [](T x, T y) { return x >= y ? x : y; },
                        [](T x, T y) { return x >= y ? T{1} : T{0}; },
                        [](T x, T y) { return x >= y ? T{0} : T{1}; });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> operator-(Var<T> a) {
  return scale(a, T{-1});
}

template <typename T>
Var<T> relu(Var<T> a) {
  return detail::unary(a, [](T x) { return x > T{0} ? x : T{0}; },
                       [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

/// Natural log; non-positive inputs are a domain error.
template <typename T>
Var<T> log(Var<T> a) {
  for (T v : a.value().values()) {
    if (!(v > T{0})) throw DomainError("log of non-positive value");
  }
  return detail::unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

template <typename T>
Var<T> square(Var<T> a) {
  return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

/// Clamp into [lo, hi]; gradient is zero where the clamp is active.
template <typename T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  return detail::unary(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                       [lo, hi](T x, T) { return (x < lo || x > hi) ? T{0} : T{1}; });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = tape.value(a);
  T s = T{0};
  for (T v : A.values()) s += v;
  const std::size_t ia = a.id;
  return tape.push(Tensor<T>::scalar(s), tape.requires_grad(a), [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad_ref(self)[0];
    Tensor<T>& ga = t.grad_ref(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw UsageError("mean of empty tensor");
  return scale(sum(a), T{1} / static_cast<T>(n));
}

/// Row sums: (B x C) -> (B x 1).
template <typename T>
Var<T> sum_rows(Var<T> a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = tape.value(a);
  const std::size_t R = A.rows(), C = A.cols();
  Tensor<T> out(R, 1);
  for (std::size_t r = 0; r < R; ++r) {
    T s = T{0};
    for (std::size_t c = 0; c < C; ++c) s += A(r, c);
    out(r, 0) = s;
  }
  const std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a), [ia, R, C](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad_ref(self);
    Tensor<T>& ga = t.grad_ref(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[r];
  });
}

/// Picks a(r, index[r]) for each row: (B x C) -> (B x 1).
template <typename T>
Var<T> gather(Var<T> a, std::span<const std::size_t> index) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = tape.value(a);
  const std::size_t R = A.rows(), C = A.cols();
  if (index.size() != R) throw ConfigError("gather index length does not match batch");
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor<T> out(R, 1);
  for (std::size_t r = 0; r < R; ++r) {
    if (idx[r] >= C) throw ConfigError("gather index out of range");
    out(r, 0) = A(r, idx[r]);
  }
  const std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a),
                   [ia, C, idx = std::move(idx)](Tape<T>& t, std::size_t self) {
                     const Tensor<T>& g = t.grad_ref(self);
                     Tensor<T>& ga = t.grad_ref(ia);
                     for (std::size_t r = 0; r < idx.size(); ++r) ga[r * C + idx[r]] += g[r];
                   });
}

/// Row-wise log-softmax with max subtraction.
template <typename T>
Var<T> log_softmax(Var<T> a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = tape.value(a);
  const std::size_t R = A.rows(), C = A.cols();
  if (C == 0) throw UsageError("log_softmax of empty row");
  Tensor<T> out(A.shape());
  for (std::size_t r = 0; r < R; ++r) {
    T m = A(r, 0);
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, A(r, c));
    T s = T{0};
    for (std::size_t c = 0; c < C; ++c) s += std::exp(A(r, c) - m);
    const T lse = m + std::log(s);
    for (std::size_t c = 0; c < C; ++c) out(r, c) = A(r, c) - lse;
  }
  const std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a), [ia, R, C](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad_ref(self);
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& ga = t.grad_ref(ia);
    for (std::size_t r = 0; r < R; ++r) {
      T gs = T{0};
      for (std::size_t c = 0; c < C; ++c) gs += g[r * C + c];
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] += g[r * C + c] - std::exp(Y[r * C + c]) * gs;
    }
  });
}

/// Row-wise softmax with max subtraction.
template <typename T>
Var<T> softmax(Var<T> a) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& A = tape.value(a);
  const std::size_t R = A.rows(), C = A.cols();
  if (C == 0) throw UsageError("softmax of empty row");
  Tensor<T> out(A.shape());
  for (std::size_t r = 0; r < R; ++r) {
    T m = A(r, 0);
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, A(r, c));
    T s = T{0};
    for (std::size_t c = 0; c < C; ++c) {
      out(r, c) = std::exp(A(r, c) - m);
      s += out(r, c);
    }
    for (std::size_t c = 0; c < C; ++c) out(r, c) /= s;
  }
  const std::size_t ia = a.id;
  return tape.push(std::move(out), tape.requires_grad(a), [ia, R, C](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad_ref(self);
    const Tensor<T>& Y = t.value(self);
    Tensor<T>& ga = t.grad_ref(ia);
    for (std::size_t r = 0; r < R; ++r) {
      T dotgy = T{0};
      for (std::size_t c = 0; c < C; ++c) dotgy += g[r * C + c] * Y[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        ga[r * C + c] += Y[r * C + c] * (g[r * C + c] - dotgy);
    }
  });
}

/**
 * Affine map y = x W^T + b with W stored out x in and b of length out.
 * Pass a default-constructed `b` (tape == nullptr) for no bias.
 */
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  Tape<T>& tape = detail::same_tape(x, w);
  const Tensor<T>& X = tape.value(x);
  const Tensor<T>& W = tape.value(w);
  const std::size_t B = X.rows(), in = X.cols();
  if (W.rank() != 2 || W.cols() != in) {
    throw ConfigError("linear: input width " + std::to_string(in) + " does not match weight " +
                      shape_string(W.shape()));
  }
  const std::size_t out = W.rows();
  const bool has_bias = b.tape != nullptr;
  const T* bias = nullptr;
  if (has_bias) {
    const Tensor<T>& Bv = tape.value(b);
    if (Bv.size() != out) throw ConfigError("linear: bias length does not match output width");
    bias = Bv.data();
  }
  Tensor<T> Y(B, out);
  std::vector<std::size_t> scratch;
  for (std::size_t r = 0; r < B; ++r)
    kernels::affine_row(W.data(), bias, X.data() + r * in, Y.data() + r * out, in, out, scratch);
  const bool rg = tape.requires_grad(x) || tape.requires_grad(w) ||
                  (has_bias && tape.requires_grad(b));
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  return tape.push(std::move(Y), rg, [=](Tape<T>& t, std::size_t self) {
    const Tensor<T>& G = t.grad_ref(self);
    const Tensor<T>& X = t.value(ix);
    const Tensor<T>& W = t.value(iw);
    std::vector<std::size_t> scratch;
    if (t.requires_grad(ix)) {
      Tensor<T>& gx = t.grad_ref(ix);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t o = 0; o < out; ++o) {
          const T g = G[r * out + o];
          if (g != T{0}) kernels::axpy(g, W.data() + o * in, gx.data() + r * in, in);
        }
    }
    if (t.requires_grad(iw)) {
      Tensor<T>& gw = t.grad_ref(iw);
      for (std::size_t r = 0; r < B; ++r)
        kernels::outer_accumulate(G.data() + r * out, X.data() + r * in, gw.data(), in, out, scratch);
    }
    if (has_bias && t.requires_grad(ib)) {
      Tensor<T>& gb = t.grad_ref(ib);
      for (std::size_t r = 0; r < B; ++r)
        for (std::size_t o = 0; o < out; ++o) gb[o] += G[r * out + o];
    }
  });
}

/**
 * Block-selected affine map: for row r, computes only outputs
 * [block_index[r] * block, (block_index[r] + 1) * block) of x W^T + b.
 * Result is B x block. Used when a wide head is regressed one block per sample.
 */
template <typename T>
Var<T> linear_block(Var<T> x, Var<T> w, Var<T> b, std::span<const std::size_t> block_index,
                    std::size_t block) {
  Tape<T>& tape = detail::same_tape(x, w);
  const Tensor<T>& X = tape.value(x);
  const Tensor<T>& W = tape.value(w);
  const Tensor<T>& Bv = tape.value(b);
  const std::size_t B = X.rows(), in = X.cols();
  if (W.cols() != in || Bv.size() != W.rows()) throw ConfigError("linear_block: shape mismatch");
  if (block_index.size() != B) throw ConfigError("linear_block: index length does not match batch");
  std::vector<std::size_t> idx(block_index.begin(), block_index.end());
  for (std::size_t k : idx) {
    if ((k + 1) * block > W.rows()) throw ConfigError("linear_block: block index out of range");
  }
  Tensor<T> Y(B, block);
  std::vector<std::size_t> scratch;
  for (std::size_t r = 0; r < B; ++r) {
    const std::size_t off = idx[r] * block;
    kernels::affine_row(W.data() + off * in, Bv.data() + off, X.data() + r * in,
                        Y.data() + r * block, in, block, scratch);
  }
  const bool rg = tape.requires_grad(x) || tape.requires_grad(w) || tape.requires_grad(b);
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  return tape.push(std::move(Y), rg, [=, idx = std::move(idx)](Tape<T>& t, std::size_t self) {
    const Tensor<T>& G = t.grad_ref(self);
    const Tensor<T>& X = t.value(ix);
    const Tensor<T>& W = t.value(iw);
    std::vector<std::size_t> scratch;
    for (std::size_t r = 0; r < B; ++r) {
      const std::size_t off = idx[r] * block;
      const T* g = G.data() + r * block;
      if (t.requires_grad(ix)) {
        Tensor<T>& gx = t.grad_ref(ix);
        for (std::size_t o = 0; o < block; ++o)
          if (g[o] != T{0}) kernels::axpy(g[o], W.data() + (off + o) * in, gx.data() + r * in, in);
      }
      if (t.requires_grad(iw)) {
        kernels::outer_accumulate(g, X.data() + r * in, t.grad_ref(iw).data() + off * in, in, block,
                                  scratch);
      }
      if (t.requires_grad(ib)) {
        Tensor<T>& gb = t.grad_ref(ib);
        for (std::size_t o = 0; o < block; ++o) gb[off + o] += g[o];
      }
    }
  });
}

}  // namespace cee::nn
