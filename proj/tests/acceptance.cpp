// Acceptance runner: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion ...]   (default: all)
// Exit status is 0 even when a criterion fails; the lines are the result. Pass --strict to exit 1 on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cee/harness/run.hpp"
#include "cee/mask/causal_mask.hpp"
#include "cee/oracle/oracle.hpp"
#include "cee/training/curiosity.hpp"
#include "cee/training/gae.hpp"
#include "support/nn_oracles.hpp"

using namespace cee;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  if (v == 0.0) return "0";
  if (std::abs(v) < 1e-3 || std::abs(v) >= 1e5)
    os << std::scientific << std::setprecision(2) << v;
  else
    os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], 2);
  return s + "]";
}

harness::fs::path work_dir(const std::string& name) {
  const auto p = harness::fs::temp_directory_path() / ("cee_acceptance_" + name);
  harness::fs::remove_all(p);
  harness::fs::create_directories(p);
  return p;
}

Outcome effect_identity() {
  const auto r = oracle::identity_sweep(100, 1);
  return {r.max_effect_vs_n < 1e-9, "max |C - N(s,a,a)| = " + fmt(r.max_effect_vs_n) + " over " +
                                        std::to_string(r.checks) + " (s,a) pairs"};
}

Outcome marginal_effect() {
  const auto r = oracle::marginal_effect_sweep(100, 2, 0.1);
  const bool ok = r.zero_cases > 0 && r.positive_cases > 0 && r.max_zero_case_effect < 1e-12 &&
                  r.min_positive_case_effect > 1e-4;
  return {ok, "max C on marginal rows " + fmt(r.max_zero_case_effect) + " (" + std::to_string(r.zero_cases) +
                  "), min C at TV >= 0.1 " + fmt(r.min_positive_case_effect) + " (" +
                  std::to_string(r.positive_cases) + ")"};
}

Outcome similarity_identity() {
  const auto r = oracle::identity_sweep(100, 3);
  return {r.max_similarity_vs_n < 1e-9, "max |KL - (N_ii - N_ij)| = " + fmt(r.max_similarity_vs_n)};
}

Outcome masked_policy() {
  Rng rng(4);
  double worst_p = 0.0, worst_grad = 0.0, worst_renorm = 0.0;
  bool sampled_masked = false;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 15);
    std::vector<double> l(n);
    for (double& v : l) v = uniform(rng, -20.0, 20.0);
    mask::MaskVector m = mask::MaskVector::all(n);
    for (std::size_t i = 0; i < n; ++i)
      if (uniform01(rng) < 0.5) m.set(i, false);
    if (m.count() == 0) m.set(uniform_index(rng, n), true);
    const auto p = mask::masked_distribution(l, m);
    const auto full = nn::softmax(l);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (m.available[i]) z += full[i];
    for (std::size_t i = 0; i < n; ++i) {
      if (m.available[i])
        worst_renorm = std::max(worst_renorm, std::abs(p[i] - full[i] / z));
      else
        worst_p = std::max(worst_p, p[i]);
    }
    if (t < 1) {
      for (int k = 0; k < 100000; ++k) sampled_masked = sampled_masked || !m.available[nn::categorical_sample(p, rng)];
    }
  }
  {
    // one adversarial case: the masked logits dominate
    mask::MaskVector m = mask::MaskVector::all(5);
    m.set(0, false);
    m.set(3, false);
    const auto p = mask::masked_distribution(std::vector<double>{30.0, -1.0, 0.0, 40.0, 1.0}, m);
    for (int k = 0; k < 100000; ++k) sampled_masked = sampled_masked || !m.available[nn::categorical_sample(p, rng)];
    worst_p = std::max({worst_p, p[0], p[3]});
  }
  for (int t = 0; t < 50; ++t) {
    const std::size_t B = 4, N = 6;
    nn::Tensor<double> logits(B, N), lm(B, N);
    std::vector<std::size_t> taken(B);
    for (std::size_t b = 0; b < B; ++b) {
      mask::MaskVector m = mask::MaskVector::all(N);
      for (std::size_t i = 0; i < N; ++i) {
        logits(b, i) = uniform(rng, -5, 5);
        if (uniform01(rng) < 0.5) m.set(i, false);
      }
      if (m.count() == 0) m.set(0, true);
      for (std::size_t i = 0; i < N; ++i) lm(b, i) = m.log_mask[i];
      do taken[b] = uniform_index(rng, N);
      while (!m.available[taken[b]]);
    }
    nn::Tape<double> tape;
    auto x = tape.variable(logits);
    auto logp = mask::masked_log_softmax(x, lm);
    auto loss = nn::mean(nn::gather(logp, std::span<const std::size_t>(taken))) + nn::sum(nn::exp(logp) * logp);
    tape.backward(loss);
    const auto g = tape.grad(x);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < N; ++i)
        if (lm(b, i) != 0.0) worst_grad = std::max(worst_grad, std::abs(g(b, i)));
  }
  const bool ok = worst_p < 1e-30 && !sampled_masked && worst_grad < 1e-6 && worst_renorm < 1e-9;
  return {ok, "max masked prob " + fmt(worst_p) + ", masked draws " + (sampled_masked ? "seen" : "none") +
                  " in 2e5, max masked grad " + fmt(worst_grad) + ", renorm error " + fmt(worst_renorm)};
}

Outcome autodiff() {
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto p = test_support::random_mlp(rng, 3, 16);
    std::vector<std::vector<double>> x(3, std::vector<double>(p.in_dim()));
    for (auto& r : x)
      for (double& v : r) v = uniform(rng, -1, 1);
    auto loss_value = [&](const nn::MlpParams<double>& q) {
      const auto y = test_support::matmul_forward(q, x);
      double s = 0.0;
      for (const auto& row : y)
        for (std::size_t o = 0; o < row.size(); ++o) s += 0.5 * row[o] * row[o] + 0.3 * (o + 1) * row[o];
      return s;
    };
    nn::Tape<double> tape;
    auto b = nn::bind(tape, p);
    auto y = nn::mlp_forward(p, b, tape.constant(nn::stack_rows<double>(x)));
    nn::Tensor<double> coef(nn::Shape{1, y.value().cols()});
    for (std::size_t o = 0; o < y.value().cols(); ++o) coef[o] = 0.3 * (o + 1);
    auto loss = nn::sum(nn::scale(nn::square(y), 0.5) + y * tape.constant(coef));
    tape.backward(loss);
    auto g = nn::gradients(tape, p, b);
    const auto fd = test_support::finite_difference_grads(p, loss_value, 1e-5);
    const auto gt = g.tensors();
    for (std::size_t k = 0; k < gt.size(); ++k)
      for (std::size_t i = 0; i < gt[k]->size(); ++i)
        worst = std::max(worst, test_support::relative_error((*gt[k])[i], fd[k][i]));
  }
  return {worst < 1e-6, "max relative error " + fmt(worst) + " over 20 networks (float64)"};
}

Outcome chain_fidelity() {
  constexpr std::uint64_t seed = 0;
  auto env = envs::make_task("chain-noop", seed);
  Rng rng(harness::phase1_seed(seed));
  auto m = training::make_phase1_models<float>(*env, models::NetworkConfig{}, 3e-4, rng);
  training::Phase1Config cfg;
  cfg.steps = 20000;
  training::pretrain_phase1(*env, m, cfg, rng);

  const double log2 = std::numbers::ln2;
  double noop_max = -1e9, causal_err = 0.0;
  std::vector<int> clean(env->observation_size(), -1);
  const mask::MaskConfig mc;
  for (std::size_t s = 0; s < 4; ++s) {
    std::vector<double> obs(env->observation_size(), 0.0);
    obs[s] = 1.0;
    const auto nm = models::n_value_matrix(m.nvalue, obs);
    for (std::size_t a = 0; a < 6; ++a) {
      if (a < 2)
        causal_err = std::max(causal_err, std::abs(nm[a][a] - log2));
      else
        noop_max = std::max(noop_max, nm[a][a]);
    }
    const auto d = mask::build_mask(nm, mc);
    clean[s] = std::count(d.mask.available.begin() + 2, d.mask.available.end(), true) <= 1 ? 1 : 0;
  }
  // visited-state weighting: a fresh uniform walk
  Rng walk(99);
  std::size_t visits = 0, good = 0;
  env->reset();
  for (int t = 0; t < 5000; ++t) {
    if (env->done()) env->reset();
    const auto obs = env->observation();
    std::size_t s = 0;
    while (s < obs.size() && obs[s] == 0.0) ++s;
    ++visits;
    good += clean.at(s) == 1;
    env->step(uniform_index(walk, 6));
  }
  const double frac = static_cast<double>(good) / static_cast<double>(visits);
  const bool ok = noop_max < 0.05 && causal_err < 0.1 && frac >= 0.95;
  return {ok, "max no-op diagonal " + fmt(noop_max) + " (< 0.05), max causal error " + fmt(causal_err) +
                  " (< 0.1), duplicate-free mask in " + fmt(100 * frac, 1) + "% of visited states"};
}

harness::ExperimentConfig experiment(const std::string& task, mask::MaskMode mode, std::int64_t phase2,
                                     const harness::fs::path& dir) {
  harness::ExperimentConfig c;
  c.task = task;
  c.mode = mode;
  c.seeds = {0, 1, 2, 3, 4};
  c.phase2_steps = phase2;
  c.output_dir = dir.string();
  c.heatmap_milestones = {50000, 100000, 200000};
  return c;
}

// Trains every seed of `c`; returns the per-seed TrainResults.
std::vector<harness::TrainResult> train_all(const harness::ExperimentConfig& c) {
  harness::prepare_run_directory(c);
  std::vector<harness::TrainResult> out;
  for (auto seed : c.seeds) {
    std::optional<harness::Checkpoint> ck;
    if (c.mode != mask::MaskMode::Ppo) ck = harness::load_checkpoint(harness::pretrain_seed(c, seed).checkpoint.string());
    out.push_back(harness::train_seed(c, seed, ck ? &*ck : nullptr));
  }
  return out;
}

Outcome maze_direction() {
  const auto dir = work_dir("maze");
  std::vector<double> final[2];
  const mask::MaskMode modes[2] = {mask::MaskMode::Ppo, mask::MaskMode::Cee};
  for (int k = 0; k < 2; ++k)
    for (const auto& r : train_all(experiment("maze-6", modes[k], 200000, dir)))
      final[k].push_back(training::final_success_rate(r.report.rows).value_or(0.0));
  const double ppo = median(final[0]), cee = median(final[1]);
  return {cee >= ppo && cee >= 0.8, "median final success cee " + fmt(cee) + " " + list(final[1]) + " vs ppo " +
                                        fmt(ppo) + " " + list(final[0])};
}

Outcome grid_direction() {
  const auto dir = work_dir("grid");
  std::vector<double> ret[2];
  const mask::MaskMode modes[2] = {mask::MaskMode::Ppo, mask::MaskMode::Cee};
  for (int k = 0; k < 2; ++k) {
    const auto c = experiment("unlock-pickup", modes[k], 300000, dir);
    for (auto& r : train_all(c)) {
      const std::uint64_t seed = c.seeds[ret[k].size()];
      harness::LoadedPolicy p{r.agent.ac, r.nvalue};
      ret[k].push_back(harness::evaluate_seed(c, seed, p, c.eval_episodes, true).mean_return);
    }
  }
  const double ppo = median(ret[0]), cee = median(ret[1]);
  return {cee >= ppo && cee >= 0.5 && ppo < cee, "median greedy eval return cee " + fmt(cee) + " " + list(ret[1]) +
                                                      " vs ppo " + fmt(ppo) + " " + list(ret[0])};
}

Outcome reward_formula() {
  envs::GridWorld w(5, 5, 100);
  w.wall_border();
  w.place_agent(2, 2, 0);
  w.at(3, 2) = envs::Cell{envs::ObjectType::Ball, envs::Color::Red};
  w.set_mission({envs::GridTask::PickupTarget, envs::ObjectType::Ball, envs::Color::Red, envs::ObjectType::Empty,
                 envs::Color::Grey});
  for (int i = 0; i < 9; ++i) w.step(envs::GridAction::Done);
  const auto s = w.step(envs::GridAction::Pickup);
  const bool ok = s.success && s.done && w.step_count() == 10 && s.reward == 0.91;
  std::ostringstream os;
  os << std::setprecision(17) << "success at step " << w.step_count() << " of 100 gives reward " << s.reward;
  return {ok, os.str()};
}

Outcome pipeline_invariants() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  Rng rng(10);
  bool partition = true, normalized = true, nonempty = true, monotone = true;
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    mask::Matrix nm(n, std::vector<double>(n));
    for (auto& row : nm)
      for (double& v : row) v = uniform(rng, -2.0, 2.0);
    const auto sim = mask::similarity(nm);
    const auto cl = mask::cluster_actions(sim, 0.05 + uniform01(rng));
    std::vector<int> seen(n, 0);
    for (std::size_t k = 0; k < cl.clusters.size(); ++k) {
      partition = partition && !cl.clusters[k].empty();
      for (std::size_t i : cl.clusters[k]) {
        ++seen[i];
        partition = partition && cl.cluster_id[i] == k;
      }
    }
    for (int s : seen) partition = partition && s == 1;

    const auto eff = mask::causal_effects(nm);
    const auto rel = mask::relative_effects(eff, cl, uniform(rng, 0.1, 3.0));
    for (const auto& members : cl.clusters) {
      double s = 0.0;
      for (std::size_t i : members) s += rel[i];
      normalized = normalized && std::abs(s - 1.0) <= 1e-9;
    }
    for (auto mode : {mask::MaskMode::Ppo, mask::MaskMode::Cee, mask::MaskMode::CeeWoc, mask::MaskMode::Npm,
                      mask::MaskMode::NpmRandom}) {
      mask::MaskConfig cfg;
      cfg.mode = mode;
      nonempty = nonempty && mask::build_mask(nm, cfg, &rng).mask.count() > 0;
    }
    const double lo = uniform(rng, 0.05, 0.9), hi = uniform(rng, lo, 0.95);
    const auto a = mask::minimal_action_space(rel, cl, lo);
    const auto b = mask::minimal_action_space(rel, cl, hi);
    for (const auto& members : cl.clusters) {
      bool above = false;
      for (std::size_t i : members) above = above || rel[i] > hi;
      if (!above) continue;
      for (std::size_t i : members) monotone = monotone && (!b.available[i] || a.available[i]);
    }
  }
  check(partition, "partition");
  check(normalized, "normalization");
  check(nonempty, "non-empty masks");
  check(monotone, "tau monotonicity");

  const auto g = training::compute_gae(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5},
                                       {false, false}, 0.0, 0.99, 0.95);
  check(std::abs(g.advantages[0] - 0.46525) < 1e-12 && std::abs(g.advantages[1] - 0.5) < 1e-15, "gae example");

  {
    training::VisitCounter vc(2);
    vc.visit(3, 1);
    const double first = training::curiosity_reward(vc, 3, 1);
    for (int i = 0; i < 3; ++i) vc.visit(3, 1);
    check(first == 1.0 && training::curiosity_reward(vc, 3, 1) == 0.5, "curiosity values");
  }

  {
    auto env = envs::make_task("maze-6", 0);
    Rng r(11);
    auto ac = models::make_actor_critic<float>(env->observation_size(), env->action_count(), {}, r);
    harness::Checkpoint ck;
    ck.modules.push_back(harness::capture("actor", ac.actor));
    const auto back = harness::decode_checkpoint(harness::encode_checkpoint(ck));
    auto other = models::make_actor_critic<float>(env->observation_size(), env->action_count(), {}, r);
    harness::restore(back.module("actor"), other.actor);
    const auto obs = env->observation();
    const auto x = models::policy_logits(ac, obs), y = models::policy_logits(other, obs);
    bool same = x.size() == y.size();
    for (std::size_t i = 0; same && i < x.size(); ++i)
      same = std::bit_cast<std::uint32_t>(x[i]) == std::bit_cast<std::uint32_t>(y[i]);
    check(same, "checkpoint bit-identity");
  }

  {
    std::string csv[2];
    for (int k = 0; k < 2; ++k) {
      const auto dir = work_dir("determinism_" + std::to_string(k));
      harness::ExperimentConfig c;
      c.task = "chain-noop";
      c.output_dir = dir.string();
      c.phase1_steps = 2048;
      c.phase2_steps = 4096;
      c.phase1.rollout_steps = 512;
      c.ppo.n_steps = 512;
      const auto p1 = harness::pretrain_seed(c, 0);
      const auto ck = harness::load_checkpoint(p1.checkpoint.string());
      harness::train_seed(c, 0, &ck);
      std::ifstream in(harness::seed_directory(c, 0) / "metrics.csv");
      std::stringstream ss;
      ss << in.rdbuf();
      csv[k] = ss.str();
    }
    check(!csv[0].empty() && csv[0] == csv[1], "metric CSV determinism");
  }

  std::string detail = "partition, normalization, non-empty, tau monotonicity, gae 0.46525, curiosity {1, 0.5}, "
                       "checkpoint bit-identity, CSV determinism";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f + ";";
  }
  return {failed.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "causal effect equals N diagonal", effect_identity},
      {2, "zero effect iff marginal row", marginal_effect},
      {3, "similarity equals N difference", similarity_identity},
      {4, "masked policy contract", masked_policy},
      {5, "autodiff vs finite differences", autodiff},
      {6, "learned N fidelity on chain-noop", chain_fidelity},
      {7, "maze-6: cee vs ppo", maze_direction},
      {8, "unlock-pickup: cee vs ppo", grid_direction},
      {9, "grid reward formula", reward_formula},
      {10, "pipeline invariants", pipeline_invariants},
  };
  std::set<int> chosen;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") {
      strict = true;
      continue;
    }
    try {
      chosen.insert(std::stoi(a));
    } catch (const std::exception&) {
      std::cerr << "usage: acceptance [--strict] [criterion ...]\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " [" << std::fixed << std::setprecision(1) << secs << " s] "
              << c.name << ": " << o.detail << std::endl;
  }
  return strict && failures > 0 ? 1 : 0;
}
