#pragma once

// Reference computations used only by tests. They deliberately avoid the
// library's kernels and tape so they can check those independently.

#include <cmath>
#include <functional>
#include <vector>

#include "cee/core/random.hpp"
#include "cee/nn/init.hpp"
#include "cee/nn/mlp.hpp"

namespace cee::test_support {

/// Plain triple-loop forward pass (ReLU hidden layers).
inline std::vector<std::vector<double>> matmul_forward(const nn::MlpParams<double>& p,
                                                       const std::vector<std::vector<double>>& x) {
  std::vector<std::vector<double>> h = x;
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& l = p.layers[k];
    std::vector<std::vector<double>> next(h.size(), std::vector<double>(l.out()));
    for (std::size_t b = 0; b < h.size(); ++b) {
      for (std::size_t o = 0; o < l.out(); ++o) {
        double s = l.bias[o];
        for (std::size_t i = 0; i < l.in(); ++i) s += l.weight(o, i) * h[b][i];
        if (k + 1 < p.layers.size() && s < 0.0) s = 0.0;
        next[b][o] = s;
      }
    }
    h = std::move(next);
  }
  return h;
}

/// Random MLP with 1..max_layers layers and widths in [1, max_width].
inline nn::MlpParams<double> random_mlp(Rng& rng, std::size_t max_layers, std::size_t max_width) {
  const std::size_t n_layers = 1 + uniform_index(rng, max_layers);
  std::vector<std::size_t> sizes;
  for (std::size_t k = 0; k <= n_layers; ++k) sizes.push_back(1 + uniform_index(rng, max_width));
  auto p = nn::make_mlp<double>(std::span<const std::size_t>(sizes));
  for (auto& l : p.layers) {
    for (double& w : l.weight.values()) w = uniform(rng, -1.0, 1.0);
    for (double& b : l.bias.values()) b = uniform(rng, -0.5, 0.5);
  }
  return p;
}

/// Central finite differences of `loss` w.r.t. every parameter entry, in tensors() order.
inline std::vector<std::vector<double>> finite_difference_grads(
    nn::MlpParams<double>& params, const std::function<double(const nn::MlpParams<double>&)>& loss,
    double h) {
  std::vector<std::vector<double>> out;
  for (nn::Tensor<double>* t : params.tensors()) {
    std::vector<double> g(t->size());
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double saved = (*t)[i];
      (*t)[i] = saved + h;
      const double up = loss(params);
      (*t)[i] = saved - h;
      const double down = loss(params);
      (*t)[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline double relative_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace cee::test_support
