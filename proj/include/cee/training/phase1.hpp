#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_set>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"
#include "cee/models/actor_critic.hpp"
#include "cee/models/inverse_dynamics.hpp"
#include "cee/models/n_value.hpp"
#include "cee/nn/adam.hpp"
#include "cee/nn/distributions.hpp"
#include "cee/training/buffers.hpp"
#include "cee/training/curiosity.hpp"
#include "cee/training/metric_row.hpp"
#include "cee/training/ppo.hpp"

namespace cee::training {

struct Phase1Config {
  std::int64_t steps = 20000;
  std::size_t rollout_steps = 2048;
  int epochs = 10;
  std::size_t batch_size = 64;
  int nvalue_interval = 1;
  bool use_curiosity = false;
  bool add_extrinsic = false;
  double lr = 3e-4;
  bool anneal_lr = true;  // linear decay of the model learning rates to zero
  std::size_t buffer_capacity = 50000;
  PpoConfig ppo;

  friend bool operator==(const Phase1Config&, const Phase1Config&) = default;

  void validate() const {
    if (steps < 0) throw ConfigError("phase 1: negative step budget");
    if (rollout_steps == 0 || batch_size == 0 || epochs < 1) throw ConfigError("phase 1: bad update schedule");
    if (nvalue_interval < 1) throw ConfigError("phase 1: N-value interval K must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("phase 1: lr must be positive");
    if (use_curiosity) ppo.validate();
  }
};

/// Phase-1 networks and their optimizer states.
template <typename T>
struct Phase1Models {
  models::InverseDynamicsModel<T> inverse;
  models::NValueNetwork<T> nvalue;
  nn::AdamState<T> inverse_opt;
  nn::AdamState<T> nvalue_opt;
  std::optional<PpoAgent<T>> explorer;

  Phase1Models() = default;
  Phase1Models(models::InverseDynamicsModel<T> inv, models::NValueNetwork<T> nv, double lr)
      : inverse(std::move(inv)),
        nvalue(std::move(nv)),
        inverse_opt(inverse.net, nn::AdamConfig{lr}),
        nvalue_opt(nvalue.net, nn::AdamConfig{lr}) {}
};

template <typename T>
Phase1Models<T> make_phase1_models(const envs::Environment& env, const models::NetworkConfig& net, double lr,
                                   Rng& rng) {
  auto inv = models::make_inverse_dynamics<T>(env.observation_size(), env.action_count(), net,
                                              env.transition_delta_scale(), rng);
  auto nv = models::make_n_value_network<T>(env.observation_size(), env.action_count(), net, rng);
  return Phase1Models<T>(std::move(inv), std::move(nv), lr);
}

struct Phase1Iteration {
  int iteration = 0;
  std::int64_t step = 0;
  std::optional<double> inv_dyn_loss;
  std::optional<double> nvalue_loss;
  bool nvalue_updated = false;
  std::size_t distinct_visits = 0;
  std::size_t distinct_states = 0;
  std::size_t distinct_cells = 0;
};

struct Phase1Report {
  std::vector<Phase1Iteration> iterations;
  std::size_t distinct_visits = 0;
  std::size_t distinct_states = 0;
  std::size_t distinct_cells = 0;
};

/**
 * Phase 1: collect with the behavior policy (uniform, or a PPO explorer
 * trained on the count bonus), store to the replay buffer, update the inverse
 * dynamics model every iteration and the N-value network every K-th iteration.
 */
template <typename T>
Phase1Report pretrain_phase1(envs::Environment& env, Phase1Models<T>& m, const Phase1Config& cfg, Rng& rng,
                             const std::function<void(const Phase1Iteration&)>& on_iteration = {}) {
  cfg.validate();
  const std::size_t n_actions = env.action_count();
  if (m.inverse.n_actions() != n_actions || m.nvalue.n_actions != n_actions)
    throw ConfigError("phase 1 models do not match the environment's action count");
  if (cfg.use_curiosity && !m.explorer) {
    Rng init(rng());
    m.explorer.emplace(models::make_actor_critic<T>(env.observation_size(), n_actions, {}, init), cfg.ppo.lr);
  }
  ReplayBuffer replay(cfg.buffer_capacity);
  VisitCounter counter(n_actions);
  std::unordered_set<std::uint64_t> states, cells;
  const std::uint64_t extent_x = env.visit_extent().x;
  Phase1Report report;
  env.reset();
  std::int64_t step = 0;
  int iteration = 0;
  while (step < cfg.steps) {
    ++iteration;
    const std::size_t to_collect = static_cast<std::size_t>(std::min<std::int64_t>(cfg.rollout_steps, cfg.steps - step));
    RolloutBuffer rollout;
    for (std::size_t t = 0; t < to_collect; ++t) {
      const std::vector<double> obs = env.observation();
      std::size_t a;
      std::vector<float> behavior;
      double logp = 0.0, value = 0.0;
      if (cfg.use_curiosity) {
        const auto probs = models::policy_distribution(m.explorer->ac, obs);
        a = nn::categorical_sample(probs, rng);
        behavior.assign(probs.begin(), probs.end());
        logp = nn::safe_log(probs[a]);
        value = models::state_value(m.explorer->ac, obs);
      } else {
        a = uniform_index(rng, n_actions);
      }
      const std::uint64_t key = env.visit_key();
      counter.visit(key, a);
      states.insert(key);
      const envs::VisitCell vc = env.visit_cell();
      cells.insert(static_cast<std::uint64_t>(vc.y) * extent_x + vc.x);
      const envs::StepOutcome o = env.step(a);
      replay.add({CompactObs(obs), a, CompactObs(env.observation()), std::move(behavior)});
      if (cfg.use_curiosity) {
        double r = curiosity_reward(counter, key, a);
        if (cfg.add_extrinsic) r += o.reward;
        rollout.add(obs, a, r, o.done, logp, value, std::vector<double>(n_actions, 0.0));
      }
      ++step;
      if (o.done) env.reset();
    }

    Phase1Iteration it{iteration, step};
    const bool update_nvalue = iteration % cfg.nvalue_interval == 0;
    if (replay.size() >= cfg.batch_size) {
      const std::size_t updates = std::max<std::size_t>(1, cfg.epochs * to_collect / cfg.batch_size);
      double inv_sum = 0.0, nv_sum = 0.0;
      std::vector<std::vector<double>> behavior;
      for (std::size_t u = 0; u < updates; ++u) {
        if (cfg.anneal_lr) {
          const double done = static_cast<double>(step - static_cast<std::int64_t>(to_collect)) +
                              static_cast<double>(to_collect) * static_cast<double>(u) / static_cast<double>(updates);
          const double lr = cfg.lr * std::max(0.0, 1.0 - done / static_cast<double>(cfg.steps));
          m.inverse_opt.config.lr = lr;
          m.nvalue_opt.config.lr = lr;
        }
        const auto batch = replay.sample(rng, cfg.batch_size, n_actions, &behavior);
        const auto lg = models::inverse_dynamics_loss_and_grad(m.inverse, batch);
        nn::adam_step(m.inverse.net, lg.grads, m.inverse_opt);
        inv_sum += lg.loss;
        if (update_nvalue) {
          const auto targets = models::n_value_targets(m.inverse, batch, behavior);
          const auto ng = models::n_value_loss_and_grad(m.nvalue, batch, targets);
          nn::adam_step(m.nvalue.net, ng.grads, m.nvalue_opt);
          nv_sum += ng.loss;
        }
      }
      it.inv_dyn_loss = inv_sum / static_cast<double>(updates);
      if (update_nvalue) it.nvalue_loss = nv_sum / static_cast<double>(updates);
      it.nvalue_updated = update_nvalue;
    }
    if (cfg.use_curiosity && rollout.size() > 0) {
      const double last = rollout.dones.back() ? 0.0 : models::state_value(m.explorer->ac, env.observation());
      finish_rollout(rollout, last, cfg.ppo);
      ppo_update(*m.explorer, rollout, cfg.ppo, rng);
    }
    it.distinct_visits = counter.distinct();
    it.distinct_states = states.size();
    it.distinct_cells = cells.size();
    report.iterations.push_back(it);
    if (on_iteration) on_iteration(it);
  }
  report.distinct_visits = counter.distinct();
  report.distinct_states = states.size();
  report.distinct_cells = cells.size();
  return report;
}

}  // namespace cee::training
