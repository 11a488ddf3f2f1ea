#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/models/inverse_dynamics.hpp"

namespace cee::models {

/// MLP from obs to an N*N head; entry [i*N + j] estimates N(s, a_i, a_j).
template <typename T>
struct NValueNetwork {
  nn::MlpParams<T> net;
  std::size_t n_actions = 0;
};

template <typename T>
NValueNetwork<T> make_n_value_network(std::size_t obs_dim, std::size_t n_actions, const NetworkConfig& cfg,
                                      Rng& rng) {
  NValueNetwork<T> n;
  const auto sizes = layer_sizes(obs_dim, cfg, n_actions * n_actions);
  n.net = nn::make_mlp<T>(std::span<const std::size_t>(sizes));
  nn::init_mlp(n.net, 1.0, rng);
  n.n_actions = n_actions;
  return n;
}

using Matrix = std::vector<std::vector<double>>;

/// Predicted N x N matrix at one observation.
template <typename T>
Matrix n_value_matrix(const NValueNetwork<T>& nv, std::span<const double> obs) {
  const auto flat = nn::mlp_predict(nv.net, std::span<const T>(to_precision<T>(obs)));
  const std::size_t n = nv.n_actions;
  Matrix m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      m[i][j] = static_cast<double>(flat[i * n + j]);
      if (!std::isfinite(m[i][j])) throw NumericError("N-value network produced a non-finite entry");
    }
  return m;
}

/// target[j] = log(max(P_inv(a_j | s, s'), p_min) / behavior[j]).
inline std::vector<double> n_value_target_from_probs(std::span<const double> inv_probs,
                                                     std::span<const double> behavior) {
  if (inv_probs.size() != behavior.size()) throw ConfigError("N-value target: width mismatch");
  std::vector<double> t(behavior.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (!(behavior[j] > 0.0)) throw DomainError("N-value target: behavior policy gives zero probability");
    t[j] = std::log(std::max(inv_probs[j], kProbFloor)) - std::log(behavior[j]);
  }
  return t;
}

template <typename T>
std::vector<double> n_value_target(const InverseDynamicsModel<T>& inv, std::span<const double> behavior,
                                   std::span<const double> obs, std::span<const double> next) {
  return n_value_target_from_probs(inverse_probs(inv, obs, next), behavior);
}

/**
 * Mean squared error between row a_i (the taken action) of the predicted
 * N-matrix and the sampled targets. Only the taken row is evaluated, so the
 * other rows receive no gradient.
 */
template <typename T>
nn::Var<T> n_value_loss(nn::Tape<T>& tape, const nn::MlpBinding<T>& binding, const NValueNetwork<T>& nv,
                        const TransitionBatch& batch, const std::vector<std::vector<double>>& targets) {
  batch.validate(nv.n_actions);
  if (targets.size() != batch.size()) throw ConfigError("N-value loss: one target row per transition required");
  auto x = tape.constant(stack<T>(batch.obs));
  auto h = nn::mlp_trunk(nv.net, binding, x);
  const std::size_t last = nv.net.layers.size() - 1;
  auto row = nn::linear_block(h, binding.weights[last], binding.biases[last],
                              std::span<const std::size_t>(batch.actions), nv.n_actions);
  return nn::mean(nn::square(row - tape.constant(stack<T>(targets))));
}

/// Targets for every transition in the batch; `behavior[k]` is the behavior distribution at batch.obs[k].
template <typename T>
std::vector<std::vector<double>> n_value_targets(const InverseDynamicsModel<T>& inv, const TransitionBatch& batch,
                                                 const std::vector<std::vector<double>>& behavior) {
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k)
    out.push_back(n_value_target(inv, behavior[k], batch.obs[k], batch.next_obs[k]));
  return out;
}

template <typename T>
LossAndGrad<T> n_value_loss_and_grad(const NValueNetwork<T>& nv, const TransitionBatch& batch,
                                     const std::vector<std::vector<double>>& targets) {
  nn::Tape<T> tape;
  const auto binding = nn::bind(tape, nv.net);
  auto loss = n_value_loss(tape, binding, nv, batch, targets);
  tape.backward(loss);
  return {static_cast<double>(loss.value().item()), nn::gradients(tape, nv.net, binding)};
}

}  // namespace cee::models
