#pragma once

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cee/harness/config.hpp"
#include "cee/harness/run.hpp"
#include "cee/oracle/oracle.hpp"

namespace cee::harness {

struct CliCommon {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string task, mode, out;
  std::vector<std::uint64_t> seeds;
  std::int64_t phase1_steps = -1, phase2_steps = -1;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON experiment config");
    app->add_option("--set", overrides, "override a config key, e.g. --set ppo.lr=1e-3");
    app->add_option("--task", task, "task id (maze-<n>, put-next, unlock-pickup, four-rooms-goto, chain-noop)");
    app->add_option("--mode", mode, "cee | cee-woc | npm | npm-random | ppo");
    app->add_option("--seeds", seeds, "seed list");
    app->add_option("--out", out, "output directory");
    app->add_option("--phase1-steps", phase1_steps, "Phase-1 step budget");
    app->add_option("--phase2-steps", phase2_steps, "Phase-2 step budget");
  }

  /// Defaults < config file < environment < --set < dedicated flags.
  ExperimentConfig resolve() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    c = with_env_overrides(c);
    std::vector<std::string> all = overrides;
    auto quoted = [](const std::string& s) { return nlohmann::json(s).dump(); };
    if (!task.empty()) all.push_back("task=" + quoted(task));
    if (!mode.empty()) all.push_back("mode=" + quoted(mode));
    if (!out.empty()) all.push_back("output_dir=" + quoted(out));
    if (!seeds.empty()) all.push_back("seeds=" + nlohmann::json(seeds).dump());
    if (phase1_steps >= 0) all.push_back("phase1_steps=" + std::to_string(phase1_steps));
    if (phase2_steps >= 0) all.push_back("phase2_steps=" + std::to_string(phase2_steps));
    c = apply_overrides(c, all);
    c.validate();
    return c;
  }
};

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline int cmd_pretrain(const ExperimentConfig& c, std::ostream& out) {
  prepare_run_directory(c);
  for (auto seed : c.seeds) {
    const auto r = pretrain_seed(c, seed);
    const auto& last = r.report.iterations;
    out << "seed " << seed << ": phase 1 done, " << r.report.distinct_cells << " cells visited";
    if (!last.empty() && last.back().inv_dyn_loss) out << ", inverse loss " << fixed(*last.back().inv_dyn_loss);
    out << ", checkpoint " << r.checkpoint.string() << "\n";
  }
  return 0;
}

inline int cmd_train(const ExperimentConfig& c, const std::string& phase1_path, bool pretrain, std::ostream& out) {
  prepare_run_directory(c);
  if (!phase1_path.empty() && c.seeds.size() != 1)
    throw ConfigError("--phase1 takes one checkpoint, so exactly one seed is required");
  for (auto seed : c.seeds) {
    std::optional<Checkpoint> ck;
    if (c.mode != mask::MaskMode::Ppo) {
      fs::path path = phase1_path.empty() ? seed_directory(c, seed) / "phase1.cee" : fs::path(phase1_path);
      if (pretrain && phase1_path.empty()) path = pretrain_seed(c, seed).checkpoint;
      if (!fs::exists(path)) throw IoError("missing Phase-1 checkpoint '" + path.string() + "' (run pretrain first)");
      ck = load_checkpoint(path.string());
    }
    const auto r = train_seed(c, seed, ck ? &*ck : nullptr);
    out << "seed " << seed << ": " << r.report.steps << " steps, final success rate "
        << (training::final_success_rate(r.report.rows) ? fixed(*training::final_success_rate(r.report.rows)) : "n/a")
        << ", metrics " << (seed_directory(c, seed) / "metrics.csv").string() << "\n";
  }
  return 0;
}

inline int cmd_eval(const ExperimentConfig& c, const std::string& checkpoint, int episodes, bool sampled,
                    std::ostream& out) {
  if (!checkpoint.empty() && c.seeds.size() != 1)
    throw ConfigError("--checkpoint takes one file, so exactly one seed is required");
  for (auto seed : c.seeds) {
    const fs::path path = checkpoint.empty() ? seed_directory(c, seed) / "final.cee" : fs::path(checkpoint);
    if (!fs::exists(path)) throw IoError("missing checkpoint '" + path.string() + "'");
    const Checkpoint ck = load_checkpoint(path.string());
    auto env = envs::make_task(c.task, seed);
    const LoadedPolicy p = load_policy(ck, *env, c.network);
    const auto r = evaluate_seed(c, seed, p, episodes, !sampled);
    out << "seed " << seed << ": return " << fixed(r.mean_return) << " +- " << fixed(r.std_return) << " over "
        << episodes << " episodes, success " << fixed(r.success_rate) << "\n";
  }
  return 0;
}

inline int cmd_oracle_check(std::size_t mdps, std::uint64_t seed, double tolerance, std::ostream& out) {
  const auto id = oracle::identity_sweep(mdps, seed);
  const auto t1 = oracle::marginal_effect_sweep(mdps, seed + 1);
  out << "mdps " << id.mdps << ", identity checks " << id.checks << "\n";
  out << "max |C - N(s,a,a)|            " << id.max_effect_vs_n << "\n";
  out << "max |M - (N_ii - N_ij)|        " << id.max_similarity_vs_n << "\n";
  out << "max |sum marginal - 1|         " << id.max_marginal_norm_error << "\n";
  out << "max C for marginal-equal rows  " << t1.max_zero_case_effect << " (" << t1.zero_cases << " cases)\n";
  out << "min C for rows with TV >= 0.1  " << t1.min_positive_case_effect << " (" << t1.positive_cases
      << " cases)\n";
  const bool ok = id.max_effect_vs_n < tolerance && id.max_similarity_vs_n < tolerance &&
                  id.max_marginal_norm_error < tolerance && t1.max_zero_case_effect < 1e-12 &&
                  t1.min_positive_case_effect > 1e-4;
  out << (ok ? "oracle-check passed" : "oracle-check FAILED") << "\n";
  return ok ? 0 : 1;
}

/// Rolls out a trained policy and exports the visitation grid.
inline int cmd_heatmap(const ExperimentConfig& c, const std::string& checkpoint, int episodes,
                       const std::string& prefix, std::ostream& out) {
  const std::uint64_t seed = c.seeds.front();
  const fs::path path = checkpoint.empty() ? seed_directory(c, seed) / "final.cee" : fs::path(checkpoint);
  if (!fs::exists(path)) throw IoError("missing checkpoint '" + path.string() + "'");
  const Checkpoint ck = load_checkpoint(path.string());
  auto env = envs::make_task(c.task, seed);
  const LoadedPolicy p = load_policy(ck, *env, c.network);
  training::Masker<float> masker(p.nvalue ? &*p.nvalue : nullptr, c.mask_config(), env->action_count(),
                                 eval_seed(seed));
  Rng rng(eval_seed(seed) + 2);
  training::VisitGrid grid(*env);
  for (int e = 0; e < episodes; ++e) {
    env->reset();
    while (!env->done()) {
      grid.record(*env);
      const std::vector<double> obs = env->observation();
      const auto logits = models::policy_logits(p.ac, obs);
      const auto probs = mask::masked_distribution(std::span<const float>(logits), masker.decide(obs).mask);
      env->step(nn::categorical_sample(probs, rng));
    }
  }
  const std::string target = prefix.empty() ? (seed_directory(c, seed) / "heatmap_eval").string() : prefix;
  fs::create_directories(fs::path(target).parent_path().empty() ? fs::path(".") : fs::path(target).parent_path());
  export_heatmap(grid, target);
  out << "wrote " << target << ".csv and " << target << ".pgm\n";
  return 0;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal-effect action masking for reinforcement learning"};
  app.require_subcommand(1);

  CliCommon pre_c, train_c, eval_c, heat_c;
  auto* pre = app.add_subcommand("pretrain", "Phase 1: inverse dynamics and N-value pre-training");
  pre_c.attach(pre);

  auto* train = app.add_subcommand("train", "Phase 2: PPO with the configured action mask");
  train_c.attach(train);
  std::string phase1_path;
  bool with_pretrain = false;
  train->add_option("--phase1", phase1_path, "Phase-1 checkpoint (default: the seed directory's phase1.cee)");
  train->add_flag("--pretrain", with_pretrain, "run Phase 1 first");

  auto* eval = app.add_subcommand("eval", "evaluate a trained policy");
  eval_c.attach(eval);
  std::string eval_ckpt;
  int episodes = 20;
  bool sampled = false;
  eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint (default: the seed directory's final.cee)");
  eval->add_option("--episodes", episodes, "number of episodes")->check(CLI::PositiveNumber);
  eval->add_flag("--sampled", sampled, "sample actions instead of taking the argmax");

  auto* oc = app.add_subcommand("oracle-check", "verify the exact identities on random tabular MDPs");
  std::size_t mdps = 100;
  std::uint64_t oseed = 7;
  double tol = 1e-9;
  oc->add_option("--mdps", mdps, "number of random MDPs")->check(CLI::PositiveNumber);
  oc->add_option("--seed", oseed, "random seed");
  oc->add_option("--tolerance", tol, "allowed absolute deviation");

  auto* heat = app.add_subcommand("heatmap", "roll out a trained policy and export its visitation heatmap");
  heat_c.attach(heat);
  std::string heat_ckpt, heat_out;
  int heat_episodes = 20;
  heat->add_option("--checkpoint", heat_ckpt, "policy checkpoint");
  heat->add_option("--episodes", heat_episodes, "number of episodes")->check(CLI::PositiveNumber);
  heat->add_option("--output", heat_out, "output prefix (writes .csv and .pgm)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*pre) return cmd_pretrain(pre_c.resolve(), out);
    if (*train) return cmd_train(train_c.resolve(), phase1_path, with_pretrain, out);
    if (*eval) return cmd_eval(eval_c.resolve(), eval_ckpt, episodes, sampled, out);
    if (*oc) return cmd_oracle_check(mdps, oseed, tol, out);
    if (*heat) return cmd_heatmap(heat_c.resolve(), heat_ckpt, heat_episodes, heat_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace cee::harness
