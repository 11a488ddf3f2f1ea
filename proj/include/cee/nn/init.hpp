#pragma once

#include <cmath>
#include <vector>

#include "cee/core/random.hpp"
#include "cee/nn/mlp.hpp"

namespace cee::nn {

/// He-uniform weights in [-sqrt(6/fan_in), sqrt(6/fan_in)], zero bias.
template <typename T>
void kaiming_uniform(DenseLayer<T>& layer, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(layer.in()));
  for (T& w : layer.weight.values()) w = static_cast<T>(uniform(rng, -bound, bound));
  layer.bias.fill(T{0});
}

/// (Semi-)orthogonal weights scaled by `gain` via Gram-Schmidt on a Gaussian matrix; zero bias.
template <typename T>
void orthogonal(DenseLayer<T>& layer, double gain, Rng& rng) {
  const std::size_t rows = layer.out(), cols = layer.in();
  // Orthonormalize along the longer side.
  const bool tall = rows > cols;
  const std::size_t n = tall ? cols : rows;  // vectors to orthonormalize
  const std::size_t d = tall ? rows : cols;  // vector length
  std::vector<std::vector<double>> q(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (;;) {
      for (double& v : q[i]) v = standard_normal(rng);
      for (std::size_t j = 0; j < i; ++j) {
        double p = 0.0;
        for (std::size_t k = 0; k < d; ++k) p += q[i][k] * q[j][k];
        for (std::size_t k = 0; k < d; ++k) q[i][k] -= p * q[j][k];
      }
      double norm = 0.0;
      for (double v : q[i]) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (double& v : q[i]) v /= norm;
        break;
      }
    }
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      layer.weight(r, c) = static_cast<T>(gain * (tall ? q[c][r] : q[r][c]));
  layer.bias.fill(T{0});
}

/// Kaiming-uniform hidden layers plus an orthogonal output layer with the given gain.
template <typename T>
void init_mlp(MlpParams<T>& params, double output_gain, Rng& rng) {
  for (std::size_t k = 0; k + 1 < params.layers.size(); ++k) kaiming_uniform(params.layers[k], rng);
  orthogonal(params.layers.back(), output_gain, rng);
}

}  // namespace cee::nn
