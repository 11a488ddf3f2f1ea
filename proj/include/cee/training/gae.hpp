#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cee/core/error.hpp"

namespace cee::training {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/**
 * delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t),
 * A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, returns = A + V.
 * V(s_T) is `last_value`.
 */
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             const std::vector<bool>& dones, double last_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw ConfigError("GAE inputs differ in length");
  GaeResult g{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double next_value = k + 1 < n ? values[k + 1] : last_value;
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    g.advantages[k] = next_adv;
    g.returns[k] = next_adv + values[k];
  }
  return g;
}

/// Shifts to mean 0 and scales to (population) std 1; a constant batch becomes all zeros.
inline void normalize_advantages(std::vector<double>& a) {
  if (a.empty()) return;
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double v : a) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(a.size()));
  for (double& v : a) v = sd > 1e-12 ? (v - mean) / sd : 0.0;
}

}  // namespace cee::training
