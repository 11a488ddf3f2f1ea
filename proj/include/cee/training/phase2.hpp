#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"
#include "cee/mask/causal_mask.hpp"
#include "cee/models/actor_critic.hpp"
#include "cee/models/n_value.hpp"
#include "cee/nn/distributions.hpp"
#include "cee/training/buffers.hpp"
#include "cee/training/episode_stats.hpp"
#include "cee/training/masker.hpp"
#include "cee/training/metric_row.hpp"
#include "cee/training/ppo.hpp"
#include "cee/training/visits.hpp"

namespace cee::training {

struct Phase2Config {
  std::int64_t steps = 200000;
  PpoConfig ppo;
  mask::MaskConfig mask;
  /// Skip mask construction entirely (control run for mode=ppo).
  bool maskless = false;
  std::vector<std::int64_t> heatmap_milestones;

  void validate() const {
    if (steps < 0) throw ConfigError("phase 2: negative step budget");
    ppo.validate();
  }
};

struct Phase2Hooks {
  std::function<void(const MetricRow&)> on_row;
  std::function<void(std::int64_t, const VisitGrid&)> on_milestone;
  std::function<void(std::int64_t, const envs::Environment&, const mask::MaskDecision&)> on_mask;
};

struct Phase2Report {
  std::vector<MetricRow> rows;
  VisitGrid visits;
  std::int64_t steps = 0;
  std::int64_t masked_action_violations = 0;
};

/**
 * Phase 2: per step, build the mask from the frozen N-value network, sample
 * from the masked policy, step, store; every n_steps run GAE and a PPO update
 * and emit one metric row.
 */
template <typename T>
Phase2Report train_phase2(envs::Environment& env, PpoAgent<T>& agent, const models::NValueNetwork<T>* nvalue,
                          const Phase2Config& cfg, Rng& rng, const Phase2Hooks& hooks = {}) {
  cfg.validate();
  const std::size_t n_actions = env.action_count();
  if (agent.ac.n_actions() != n_actions || agent.ac.obs_dim() != env.observation_size())
    throw ConfigError("actor-critic does not match the environment");
  Masker<T> masker(nvalue, cfg.mask, n_actions, rng());
  Phase2Report report;
  report.visits = VisitGrid(env);
  EpisodeTracker episodes;
  RolloutBuffer rollout;
  double mask_size_sum = 0.0;
  std::size_t next_milestone = 0;
  auto milestones = cfg.heatmap_milestones;
  std::sort(milestones.begin(), milestones.end());

  env.reset();
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const std::vector<double>& cur = env.observation();
    std::vector<double> obs(cur.begin(), cur.end());
    const auto logits = models::policy_logits(agent.ac, obs);
    std::vector<double> probs, log_mask(n_actions, 0.0);
    std::vector<bool> available(n_actions, true);
    if (cfg.maskless) {
      probs = nn::softmax(std::span<const T>(logits));
      mask_size_sum += static_cast<double>(n_actions);
    } else {
      const auto decision = masker.decide(obs);
      if (hooks.on_mask) hooks.on_mask(step, env, decision);
      probs = mask::masked_distribution(std::span<const T>(logits), decision.mask);
      log_mask = decision.mask.log_mask;
      available = decision.mask.available;
      mask_size_sum += static_cast<double>(decision.mask.count());
    }
    const std::size_t a = nn::categorical_sample(probs, rng);
    if (!available[a]) ++report.masked_action_violations;
    const double value = models::state_value(agent.ac, obs);
    report.visits.record(env);
    const envs::StepOutcome o = env.step(a);
    episodes.on_step(o);
    rollout.add(std::move(obs), a, o.reward, o.done, std::log(probs[a]), value, std::move(log_mask));
    if (o.done) env.reset();

    while (next_milestone < milestones.size() && milestones[next_milestone] <= step) {
      if (hooks.on_milestone) hooks.on_milestone(milestones[next_milestone], report.visits);
      ++next_milestone;
    }

    if (rollout.size() == cfg.ppo.n_steps || step == cfg.steps) {
      const double last = rollout.dones.back() ? 0.0 : models::state_value(agent.ac, env.observation());
      finish_rollout(rollout, last, cfg.ppo);
      const PpoStats st = ppo_update(agent, rollout, cfg.ppo, rng);
      MetricRow row;
      row.step = step;
      row.episode_return_mean = episodes.mean_return();
      row.episode_length_mean = episodes.mean_length();
      row.success_rate = episodes.success_rate();
      row.mean_mask_size = mask_size_sum / static_cast<double>(rollout.size());
      row.policy_loss = st.policy_loss;
      row.value_loss = st.value_loss;
      row.entropy = st.entropy;
      report.rows.push_back(row);
      if (hooks.on_row) hooks.on_row(row);
      episodes.flush();
      rollout.clear();
      mask_size_sum = 0.0;
    }
    report.steps = step;
  }
  return report;
}

}  // namespace cee::training
