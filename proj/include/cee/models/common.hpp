#pragma once

#include <span>
#include <vector>

#include "cee/nn/autodiff.hpp"
#include "cee/nn/mlp.hpp"

namespace cee::models {

/// Probabilities are clamped to [kProbFloor, 1] before any log.
inline constexpr double kProbFloor = 1e-6;

struct NetworkConfig {
  std::vector<std::size_t> hidden{64, 64};

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline std::vector<std::size_t> layer_sizes(std::size_t in, const NetworkConfig& cfg, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), cfg.hidden.begin(), cfg.hidden.end());
  s.push_back(out);
  return s;
}

template <typename T>
std::vector<T> to_precision(std::span<const double> v) {
  return std::vector<T>(v.begin(), v.end());
}

/// Stacks equally sized feature rows into a (rows x width) tensor.
template <typename T>
nn::Tensor<T> stack(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw UsageError("cannot stack an empty batch");
  const std::size_t w = rows.front().size();
  nn::Tensor<T> t(rows.size(), w);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != w) throw ConfigError("batch rows have different widths");
    for (std::size_t c = 0; c < w; ++c) t(r, c) = static_cast<T>(rows[r][c]);
  }
  return t;
}

/// Scalar loss value plus parameter gradients.
template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  nn::MlpParams<T> grads;
};

}  // namespace cee::models
