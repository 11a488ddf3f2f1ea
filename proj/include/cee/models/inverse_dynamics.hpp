#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/models/common.hpp"
#include "cee/nn/distributions.hpp"
#include "cee/nn/init.hpp"

namespace cee::models {

/// Transitions (obs, action, next obs) drawn from the replay buffer.
struct TransitionBatch {
  std::vector<std::vector<double>> obs;
  std::vector<std::size_t> actions;
  std::vector<std::vector<double>> next_obs;

  std::size_t size() const { return actions.size(); }

  void validate(std::size_t n_actions) const {
    if (actions.empty()) throw UsageError("empty transition batch");
    if (obs.size() != actions.size() || next_obs.size() != actions.size())
      throw ConfigError("transition batch columns have different lengths");
    for (std::size_t a : actions)
      if (a >= n_actions) throw ConfigError("transition batch action out of range");
  }
};

/**
 * P(a | s, s') as an MLP over [s, s', (s' - s) * delta_scale]. The scaled
 * difference is a fixed reparametrization that keeps small displacements
 * visible to the first layer.
 */
template <typename T>
struct InverseDynamicsModel {
  nn::MlpParams<T> net;
  std::size_t obs_dim = 0;
  double delta_scale = 1.0;

  std::size_t n_actions() const { return net.out_dim(); }
};

inline std::vector<double> inverse_features(std::span<const double> obs, std::span<const double> next,
                                            double delta_scale) {
  if (obs.size() != next.size()) throw ConfigError("inverse dynamics: obs and next obs differ in width");
  const std::size_t n = obs.size();
  std::vector<double> f(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = obs[i];
    f[n + i] = next[i];
    f[2 * n + i] = (next[i] - obs[i]) * delta_scale;
  }
  return f;
}

template <typename T>
InverseDynamicsModel<T> make_inverse_dynamics(std::size_t obs_dim, std::size_t n_actions, const NetworkConfig& cfg,
                                              double delta_scale, Rng& rng) {
  InverseDynamicsModel<T> m;
  const auto sizes = layer_sizes(3 * obs_dim, cfg, n_actions);
  m.net = nn::make_mlp<T>(std::span<const std::size_t>(sizes));
  nn::init_mlp(m.net, 1.0, rng);
  m.obs_dim = obs_dim;
  m.delta_scale = delta_scale;
  return m;
}

/// Clamped inverse-dynamics probabilities, each in [kProbFloor, 1].
template <typename T>
std::vector<double> inverse_probs(const InverseDynamicsModel<T>& m, std::span<const double> obs,
                                  std::span<const double> next) {
  const auto f = to_precision<T>(inverse_features(obs, next, m.delta_scale));
  const auto logits = nn::mlp_predict(m.net, std::span<const T>(f));
  auto p = nn::softmax(std::span<const T>(logits));
  for (double& v : p) v = std::clamp(v, kProbFloor, 1.0);
  return p;
}

template <typename T>
nn::Tensor<T> inverse_batch_features(const InverseDynamicsModel<T>& m, const TransitionBatch& batch) {
  std::vector<std::vector<double>> rows;
  rows.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    rows.push_back(inverse_features(batch.obs[i], batch.next_obs[i], m.delta_scale));
  return stack<T>(rows);
}

/// Mean negative log-likelihood of the taken actions, probabilities clamped to [kProbFloor, 1].
template <typename T>
nn::Var<T> inverse_dynamics_loss(nn::Tape<T>& tape, const nn::MlpBinding<T>& binding,
                                 const InverseDynamicsModel<T>& m, const TransitionBatch& batch) {
  batch.validate(m.n_actions());
  auto x = tape.constant(inverse_batch_features(m, batch));
  auto probs = nn::softmax(nn::mlp_forward(m.net, binding, x));
  auto taken = nn::gather(probs, std::span<const std::size_t>(batch.actions));
  return -nn::mean(nn::log(nn::clamp(taken, static_cast<T>(kProbFloor), T{1})));
}

template <typename T>
LossAndGrad<T> inverse_dynamics_loss_and_grad(const InverseDynamicsModel<T>& m, const TransitionBatch& batch) {
  nn::Tape<T> tape;
  const auto binding = nn::bind(tape, m.net);
  auto loss = inverse_dynamics_loss(tape, binding, m, batch);
  tape.backward(loss);
  return {static_cast<double>(loss.value().item()), nn::gradients(tape, m.net, binding)};
}

}  // namespace cee::models
