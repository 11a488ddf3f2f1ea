#pragma once

#include <cstddef>
#include <vector>

// Inner loops shared by the taped ops and the tape-free inference path.
// Inputs to the first layer are often one-hot encodings, so the affine
// kernels switch to a sparse path when a row is mostly zeros.

namespace cee::nn::kernels {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s = T{0};
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline void nonzero_indices(const T* x, std::size_t n, std::vector<std::size_t>& out) {
  out.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] != T{0}) out.push_back(i);
  }
}

inline bool is_sparse(std::size_t nnz, std::size_t n) { return nnz * 4 < n; }

/// y[o] = b[o] + sum_i W[o, i] x[i] for a single row; W is out x in.
template <typename T>
inline void affine_row(const T* w, const T* b, const T* x, T* y, std::size_t in, std::size_t out,
                       std::vector<std::size_t>& scratch) {
  nonzero_indices(x, in, scratch);
  if (is_sparse(scratch.size(), in)) {
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = w + o * in;
      T s = b ? b[o] : T{0};
      for (std::size_t i : scratch) s += wr[i] * x[i];
      y[o] = s;
    }
    return;
  }
  for (std::size_t o = 0; o < out; ++o) y[o] = (b ? b[o] : T{0}) + dot(w + o * in, x, in);
}

/// dW[o, i] += dy[o] x[i] for a single row.
template <typename T>
inline void outer_accumulate(const T* dy, const T* x, T* dw, std::size_t in, std::size_t out,
                             std::vector<std::size_t>& scratch) {
  nonzero_indices(x, in, scratch);
  if (is_sparse(scratch.size(), in)) {
    for (std::size_t o = 0; o < out; ++o) {
      const T g = dy[o];
      if (g == T{0}) continue;
      T* dwr = dw + o * in;
      for (std::size_t i : scratch) dwr[i] += g * x[i];
    }
    return;
  }
  for (std::size_t o = 0; o < out; ++o) {
    if (dy[o] != T{0}) axpy(dy[o], x, dw + o * in, in);
  }
}

}  // namespace cee::nn::kernels
