#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/models/common.hpp"
#include "cee/nn/distributions.hpp"
#include "cee/nn/init.hpp"

namespace cee::models {

/// Separate actor (logits) and critic (scalar value) networks.
template <typename T>
struct ActorCritic {
  nn::MlpParams<T> actor;
  nn::MlpParams<T> critic;

  std::size_t obs_dim() const { return actor.in_dim(); }
  std::size_t n_actions() const { return actor.out_dim(); }
};

template <typename T>
ActorCritic<T> make_actor_critic(std::size_t obs_dim, std::size_t n_actions, const NetworkConfig& cfg, Rng& rng) {
  if (obs_dim == 0 || n_actions == 0) throw ConfigError("actor-critic needs positive observation and action sizes");
  ActorCritic<T> ac;
  const auto a = layer_sizes(obs_dim, cfg, n_actions);
  const auto c = layer_sizes(obs_dim, cfg, 1);
  ac.actor = nn::make_mlp<T>(std::span<const std::size_t>(a));
  ac.critic = nn::make_mlp<T>(std::span<const std::size_t>(c));
  nn::init_mlp(ac.actor, 0.01, rng);
  nn::init_mlp(ac.critic, 1.0, rng);
  return ac;
}

template <typename T>
std::vector<T> policy_logits(const ActorCritic<T>& ac, std::span<const double> obs) {
  auto logits = nn::mlp_predict(ac.actor, std::span<const T>(to_precision<T>(obs)));
  for (T l : logits)
    if (!std::isfinite(static_cast<double>(l))) throw NumericError("policy produced non-finite logits");
  return logits;
}

/// softmax of the actor's logits.
template <typename T>
std::vector<double> policy_distribution(const ActorCritic<T>& ac, std::span<const double> obs) {
  const auto logits = policy_logits(ac, obs);
  return nn::softmax(std::span<const T>(logits));
}

template <typename T>
double state_value(const ActorCritic<T>& ac, std::span<const double> obs) {
  const double v = static_cast<double>(nn::mlp_predict(ac.critic, std::span<const T>(to_precision<T>(obs)))[0]);
  if (!std::isfinite(v)) throw NumericError("critic produced a non-finite value");
  return v;
}

}  // namespace cee::models
