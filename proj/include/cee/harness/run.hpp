#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include "cee/core/random.hpp"
#include "cee/envs/tasks.hpp"
#include "cee/harness/checkpoint.hpp"
#include "cee/harness/config.hpp"
#include "cee/harness/heatmap.hpp"
#include "cee/harness/metrics.hpp"
#include "cee/training/evaluate.hpp"
#include "cee/training/phase1.hpp"
#include "cee/training/phase2.hpp"

namespace cee::harness {

namespace fs = std::filesystem;

/// Per-run directory: <output_dir>/<task>/<mode>.
inline fs::path run_directory(const ExperimentConfig& c) {
  return fs::path(c.output_dir) / c.task / mask::to_string(c.mode);
}

inline fs::path seed_directory(const ExperimentConfig& c, std::uint64_t seed) {
  return run_directory(c) / ("seed_" + std::to_string(seed));
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
}

inline fs::path prepare_run_directory(const ExperimentConfig& c) {
  const fs::path dir = run_directory(c);
  fs::create_directories(dir);
  write_text(dir / "config.json", serialize_config(c));
  return dir;
}

// Independent streams for each stage of one seed.
inline std::uint64_t phase1_seed(std::uint64_t seed) { return mix_seed(seed, 11); }
inline std::uint64_t phase2_seed(std::uint64_t seed) { return mix_seed(seed, 12); }
inline std::uint64_t eval_seed(std::uint64_t seed) { return mix_seed(seed, 13); }

inline nlohmann::ordered_json env_meta(const envs::Environment& env) {
  return {{"task", env.name()}, {"obs_dim", env.observation_size()}, {"n_actions", env.action_count()}};
}

struct Phase1Result {
  training::Phase1Models<float> models;
  training::Phase1Report report;
  fs::path checkpoint;
};

/// Phase 1 for one seed; writes phase1_metrics.csv and phase1.cee in the seed directory.
inline Phase1Result pretrain_seed(const ExperimentConfig& c, std::uint64_t seed) {
  const fs::path dir = seed_directory(c, seed);
  fs::create_directories(dir);
  auto env = envs::make_task(c.task, seed);
  Rng rng(phase1_seed(seed));
  Phase1Result r{training::make_phase1_models<float>(*env, c.network, c.phase1.lr, rng), {}, dir / "phase1.cee"};
  MetricsWriter log((dir / "phase1_metrics.csv").string());
  r.report = training::pretrain_phase1(*env, r.models, c.phase1_config(), rng, [&](const training::Phase1Iteration& it) {
    training::MetricRow row;
    row.step = it.step;
    row.inv_dyn_loss = it.inv_dyn_loss;
    row.nvalue_loss = it.nvalue_loss;
    log.write(row);
  });
  Checkpoint ck;
  ck.step = c.phase1_steps;
  ck.rng_state = rng_state(rng);
  ck.meta = env_meta(*env);
  ck.meta["kind"] = "phase1";
  ck.meta["delta_scale"] = r.models.inverse.delta_scale;
  ck.modules.push_back(capture("inverse", r.models.inverse.net));
  ck.modules.push_back(capture("nvalue", r.models.nvalue.net));
  save_checkpoint(r.checkpoint.string(), ck);
  return r;
}

/// Rebuilds a frozen N-value network for `env` from a checkpoint; shapes must match.
inline models::NValueNetwork<float> load_nvalue(const Checkpoint& ck, const envs::Environment& env,
                                                 const models::NetworkConfig& net) {
  Rng scratch(0);
  auto nv = models::make_n_value_network<float>(env.observation_size(), env.action_count(), net, scratch);
  restore(ck.module("nvalue"), nv.net);
  return nv;
}

struct TrainResult {
  training::Phase2Report report;
  training::PpoAgent<float> agent;
  std::optional<models::NValueNetwork<float>> nvalue;
  fs::path checkpoint;
};

/**
 * Phase 2 for one seed; writes metrics.csv, heatmaps at the configured
 * milestones and final.cee. `phase1` may be null only for mode=ppo.
 */
inline TrainResult train_seed(const ExperimentConfig& c, std::uint64_t seed, const Checkpoint* phase1) {
  const fs::path dir = seed_directory(c, seed);
  fs::create_directories(dir);
  auto env = envs::make_task(c.task, seed);
  Rng rng(phase2_seed(seed));
  TrainResult r;
  if (phase1 != nullptr) r.nvalue = load_nvalue(*phase1, *env, c.network);
  if (c.mode != mask::MaskMode::Ppo && !r.nvalue)
    throw ConfigError("mode " + mask::to_string(c.mode) + " needs a Phase-1 checkpoint");
  r.agent = training::PpoAgent<float>(
      models::make_actor_critic<float>(env->observation_size(), env->action_count(), c.network, rng), c.ppo.lr);
  MetricsWriter log((dir / "metrics.csv").string());
  training::Phase2Hooks hooks;
  hooks.on_row = [&](const training::MetricRow& row) { log.write(row); };
  hooks.on_milestone = [&](std::int64_t step, const training::VisitGrid& g) {
    export_heatmap(g, (dir / ("heatmap_" + std::to_string(step))).string());
  };
  r.report = training::train_phase2(*env, r.agent, r.nvalue ? &*r.nvalue : nullptr, c.phase2_config(), rng, hooks);
  export_heatmap(r.report.visits, (dir / "heatmap_final").string());

  Checkpoint ck;
  ck.step = r.report.steps;
  ck.rng_state = rng_state(rng);
  ck.meta = env_meta(*env);
  ck.meta["kind"] = "policy";
  ck.meta["mode"] = mask::to_string(c.mode);
  ck.modules.push_back(capture("actor", r.agent.ac.actor));
  ck.modules.push_back(capture("critic", r.agent.ac.critic));
  if (r.nvalue) ck.modules.push_back(capture("nvalue", r.nvalue->net));
  r.checkpoint = dir / "final.cee";
  save_checkpoint(r.checkpoint.string(), ck);
  return r;
}

/// Loads the actor-critic (and N-value network when present) saved by train_seed.
struct LoadedPolicy {
  models::ActorCritic<float> ac;
  std::optional<models::NValueNetwork<float>> nvalue;
};

inline LoadedPolicy load_policy(const Checkpoint& ck, const envs::Environment& env, const models::NetworkConfig& net) {
  Rng scratch(0);
  LoadedPolicy p{models::make_actor_critic<float>(env.observation_size(), env.action_count(), net, scratch), {}};
  restore(ck.module("actor"), p.ac.actor);
  restore(ck.module("critic"), p.ac.critic);
  if (ck.has("nvalue")) p.nvalue = load_nvalue(ck, env, net);
  return p;
}

/// Evaluates a trained policy under the configured mask mode.
inline training::EvalResult evaluate_seed(const ExperimentConfig& c, std::uint64_t seed, const LoadedPolicy& p,
                                          int episodes, bool greedy) {
  auto env = envs::make_task(c.task, seed);
  if (c.mode != mask::MaskMode::Ppo && !p.nvalue)
    throw ConfigError("mode " + mask::to_string(c.mode) + " needs the N-value network in the checkpoint");
  training::Masker<float> masker(p.nvalue ? &*p.nvalue : nullptr, c.mask_config(), env->action_count(),
                                 eval_seed(seed));
  Rng rng(eval_seed(seed) + 1);
  return training::evaluate_policy(*env, p.ac, masker, episodes, greedy, rng);
}

}  // namespace cee::harness
