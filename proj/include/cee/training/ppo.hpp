#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/mask/causal_mask.hpp"
#include "cee/models/actor_critic.hpp"
#include "cee/nn/adam.hpp"
#include "cee/training/buffers.hpp"
#include "cee/training/gae.hpp"

namespace cee::training {

struct PpoConfig {
  double lr = 3e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double value_clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.2;
  int epochs = 10;
  std::size_t batch_size = 64;
  std::size_t n_steps = 2048;

  friend bool operator==(const PpoConfig&, const PpoConfig&) = default;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("ppo: lr must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("ppo: gamma must lie in (0, 1)");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("ppo: lambda must lie in (0, 1)");
    if (!(clip > 0.0)) throw ConfigError("ppo: clip must be positive");
    if (value_clip < 0.0 || value_coef < 0.0 || entropy_coef < 0.0) throw ConfigError("ppo: negative coefficient");
    if (epochs < 1 || batch_size == 0 || n_steps == 0) throw ConfigError("ppo: epochs, batch and n_steps must be >= 1");
  }
};

/// Actor-critic plus one Adam state per network.
template <typename T>
struct PpoAgent {
  models::ActorCritic<T> ac;
  nn::AdamState<T> actor_opt;
  nn::AdamState<T> critic_opt;

  PpoAgent() = default;
  PpoAgent(models::ActorCritic<T> net, double lr)
      : ac(std::move(net)), actor_opt(ac.actor, nn::AdamConfig{lr}), critic_opt(ac.critic, nn::AdamConfig{lr}) {}
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// One minibatch drawn from a rollout (advantages already normalized).
struct PpoBatch {
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> log_masks;
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> old_values;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

inline PpoBatch make_batch(const RolloutBuffer& r, std::span<const std::size_t> idx) {
  PpoBatch b;
  for (std::size_t k : idx) {
    b.obs.push_back(r.obs[k]);
    b.log_masks.push_back(r.log_masks[k]);
    b.actions.push_back(r.actions[k]);
    b.old_log_probs.push_back(r.log_probs[k]);
    b.old_values.push_back(r.values[k]);
    b.advantages.push_back(r.advantages[k]);
    b.returns.push_back(r.returns[k]);
  }
  return b;
}

template <typename T>
struct PpoLossTerms {
  nn::Var<T> total;
  nn::Var<T> policy;
  nn::Var<T> value;
  nn::Var<T> entropy;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

template <typename T>
nn::Tensor<T> column(std::span<const double> v) {
  nn::Tensor<T> t(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<T>(v[i]);
  return t;
}

/**
 * Clipped surrogate through the masked distribution recorded at collection,
 * clipped value loss and entropy bonus:
 * total = policy + value_coef * value - entropy_coef * entropy.
 */
template <typename T>
PpoLossTerms<T> ppo_loss(nn::Tape<T>& tape, const nn::MlpBinding<T>& actor, const nn::MlpBinding<T>& critic,
                         const models::ActorCritic<T>& ac, const PpoBatch& b, const PpoConfig& cfg) {
  if (b.size() == 0) throw UsageError("empty PPO batch");
  auto x = tape.constant(models::stack<T>(b.obs));
  auto logp_all = mask::masked_log_softmax(nn::mlp_forward(ac.actor, actor, x), models::stack<T>(b.log_masks));
  auto logp = nn::gather(logp_all, std::span<const std::size_t>(b.actions));
  auto ratio = nn::exp(logp - tape.constant(column<T>(b.old_log_probs)));
  auto adv = tape.constant(column<T>(b.advantages));
  const T lo = static_cast<T>(1.0 - cfg.clip), hi = static_cast<T>(1.0 + cfg.clip);
  auto surrogate = nn::minimum(ratio * adv, nn::clamp(ratio, lo, hi) * adv);
  PpoLossTerms<T> out;
  out.policy = -nn::mean(surrogate);
  out.entropy = -nn::scale(nn::sum(nn::exp(logp_all) * logp_all), static_cast<T>(1.0 / b.size()));

  auto v = nn::mlp_forward(ac.critic, critic, x);
  auto ret = tape.constant(column<T>(b.returns));
  auto err = nn::square(v - ret);
  if (cfg.value_clip > 0.0) {
    auto old_v = tape.constant(column<T>(b.old_values));
    const T c = static_cast<T>(cfg.value_clip);
    auto v_clipped = old_v + nn::clamp(v - old_v, -c, c);
    err = nn::maximum(err, nn::square(v_clipped - ret));
  }
  out.value = nn::scale(nn::mean(err), T{0.5});
  out.total = out.policy + nn::scale(out.value, static_cast<T>(cfg.value_coef)) -
              nn::scale(out.entropy, static_cast<T>(cfg.entropy_coef));

  const auto& lp = logp.value();
  double kl = 0.0, clipped = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double d = static_cast<double>(lp[i]) - b.old_log_probs[i];
    kl += (std::exp(d) - 1.0) - d;
    clipped += std::abs(std::exp(d) - 1.0) > cfg.clip;
  }
  out.approx_kl = kl / b.size();
  out.clip_fraction = clipped / b.size();
  return out;
}

/// Loss value and gradients for both networks on one batch.
template <typename T>
struct PpoGradients {
  double total = 0.0;
  PpoStats stats;
  nn::MlpParams<T> actor;
  nn::MlpParams<T> critic;
};

template <typename T>
PpoGradients<T> ppo_gradients(const models::ActorCritic<T>& ac, const PpoBatch& b, const PpoConfig& cfg) {
  nn::Tape<T> tape;
  const auto ab = nn::bind(tape, ac.actor);
  const auto cb = nn::bind(tape, ac.critic);
  auto terms = ppo_loss(tape, ab, cb, ac, b, cfg);
  PpoGradients<T> g;
  g.total = static_cast<double>(terms.total.value().item());
  if (!std::isfinite(g.total)) {
    throw NumericError("PPO loss is not finite (policy " + std::to_string(terms.policy.value().item()) + ", value " +
                       std::to_string(terms.value.value().item()) + ", entropy " +
                       std::to_string(terms.entropy.value().item()) + ")");
  }
  tape.backward(terms.total);
  g.stats = {static_cast<double>(terms.policy.value().item()), static_cast<double>(terms.value.value().item()),
             static_cast<double>(terms.entropy.value().item()), terms.approx_kl, terms.clip_fraction};
  g.actor = nn::gradients(tape, ac.actor, ab);
  g.critic = nn::gradients(tape, ac.critic, cb);
  return g;
}

/// GAE on the rollout, per-rollout advantage normalization.
inline void finish_rollout(RolloutBuffer& r, double last_value, const PpoConfig& cfg) {
  auto g = compute_gae(r.rewards, r.values, r.dones, last_value, cfg.gamma, cfg.lambda);
  r.returns = std::move(g.returns);
  r.advantages = std::move(g.advantages);
  normalize_advantages(r.advantages);
}

/// `epochs` passes of shuffled minibatches, one Adam step per network per minibatch.
template <typename T>
PpoStats ppo_update(PpoAgent<T>& agent, const RolloutBuffer& rollout, const PpoConfig& cfg, Rng& rng) {
  if (rollout.size() == 0 || rollout.advantages.size() != rollout.size())
    throw UsageError("ppo_update needs a finished rollout");
  std::vector<std::size_t> order(rollout.size());
  PpoStats acc;
  std::size_t batches = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = make_batch(rollout, std::span<const std::size_t>(order.data() + start, end - start));
      const auto g = ppo_gradients(agent.ac, batch, cfg);
      nn::adam_step(agent.ac.actor, g.actor, agent.actor_opt);
      nn::adam_step(agent.ac.critic, g.critic, agent.critic_opt);
      acc.policy_loss += g.stats.policy_loss;
      acc.value_loss += g.stats.value_loss;
      acc.entropy += g.stats.entropy;
      acc.approx_kl += g.stats.approx_kl;
      acc.clip_fraction += g.stats.clip_fraction;
      ++batches;
    }
  }
  const double n = static_cast<double>(batches);
  return {acc.policy_loss / n, acc.value_loss / n, acc.entropy / n, acc.approx_kl / n, acc.clip_fraction / n};
}

}  // namespace cee::training
