#pragma once

#include <cmath>
#include <vector>

#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"
#include "cee/models/actor_critic.hpp"
#include "cee/nn/distributions.hpp"
#include "cee/training/masker.hpp"

namespace cee::training {

struct EvalResult {
  std::vector<double> returns;
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;
  double mean_length = 0.0;
};

/// Runs full episodes with the masked policy: argmax when `greedy`, sampled otherwise.
template <typename T>
EvalResult evaluate_policy(envs::Environment& env, const models::ActorCritic<T>& ac, Masker<T>& masker, int episodes,
                           bool greedy, Rng& rng) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  EvalResult r;
  double successes = 0.0, length = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    double ret = 0.0;
    while (!env.done()) {
      const std::vector<double> obs = env.observation();
      const auto logits = models::policy_logits(ac, obs);
      const auto probs = mask::masked_distribution(std::span<const T>(logits), masker.decide(obs).mask);
      const std::size_t a = greedy ? nn::argmax(probs) : nn::categorical_sample(probs, rng);
      const auto o = env.step(a);
      ret += o.reward;
      if (o.done) {
        successes += o.success;
        length += env.step_count();
      }
    }
    r.returns.push_back(ret);
  }
  const double n = static_cast<double>(episodes);
  for (double v : r.returns) r.mean_return += v / n;
  for (double v : r.returns) r.std_return += (v - r.mean_return) * (v - r.mean_return) / n;
  r.std_return = std::sqrt(r.std_return);
  r.success_rate = successes / n;
  r.mean_length = length / n;
  return r;
}

}  // namespace cee::training
