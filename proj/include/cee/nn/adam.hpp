#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/nn/mlp.hpp"

namespace cee::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(const MlpParams<T>& params, AdamConfig cfg) : config(cfg) {
    for (const Tensor<T>* t : params.tensors()) {
      first_moment.emplace_back(t->shape(), T{0});
      second_moment.emplace_back(t->shape(), T{0});
    }
  }
};

/**
 * One bias-corrected Adam update. Throws NumericError (leaving parameters
 * untouched) when any gradient entry is non-finite.
 */
template <typename T>
void adam_step(MlpParams<T>& params, const MlpParams<T>& grads, AdamState<T>& state) {
  auto p = params.tensors();
  auto g = grads.tensors();
  if (p.size() != g.size() || p.size() != state.first_moment.size())
    throw ConfigError("adam_step: parameter, gradient and state layouts differ");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!p[k]->same_shape(*g[k]) || !p[k]->same_shape(state.first_moment[k]))
      throw ConfigError("adam_step: shape mismatch in tensor " + std::to_string(k));
    if (!g[k]->all_finite()) throw NumericError("adam_step: non-finite gradient");
  }
  state.step += 1;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T step_size = static_cast<T>(c.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(c.eps);
  for (std::size_t k = 0; k < p.size(); ++k) {
    T* w = p[k]->data();
    const T* gr = g[k]->data();
    T* m = state.first_moment[k].data();
    T* v = state.second_moment[k].data();
    const std::size_t n = p[k]->size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * gr[i];
      v[i] = b2 * v[i] + (T{1} - b2) * gr[i] * gr[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

}  // namespace cee::nn
