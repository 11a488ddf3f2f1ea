#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"

namespace cee::envs {

/// Explicit finite MDP: P[s][a][s'], R[s][a][s'] and a start distribution.
class TabularMDP {
 public:
  TabularMDP() = default;

  TabularMDP(std::size_t n_states, std::size_t n_actions)
      : n_states_(n_states),
        n_actions_(n_actions),
        transition_(n_states * n_actions * n_states, 0.0),
        reward_(n_states * n_actions * n_states, 0.0),
        start_(n_states, n_states ? 1.0 / static_cast<double>(n_states) : 0.0) {
    if (n_states == 0 || n_actions == 0) throw ConfigError("tabular MDP needs at least one state and action");
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  double& p(std::size_t s, std::size_t a, std::size_t s2) { return transition_[offset(s, a) + s2]; }
  double p(std::size_t s, std::size_t a, std::size_t s2) const { return transition_[offset(s, a) + s2]; }
  double& r(std::size_t s, std::size_t a, std::size_t s2) { return reward_[offset(s, a) + s2]; }
  double r(std::size_t s, std::size_t a, std::size_t s2) const { return reward_[offset(s, a) + s2]; }

  /// Next-state distribution P(. | s, a).
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {transition_.data() + offset(s, a), n_states_};
  }
  void set_row(std::size_t s, std::size_t a, const std::vector<double>& dist) {
    if (dist.size() != n_states_) throw ConfigError("transition row has wrong length");
    for (std::size_t k = 0; k < n_states_; ++k) p(s, a, k) = dist[k];
  }

  std::vector<double>& start() { return start_; }
  const std::vector<double>& start() const { return start_; }

  /// Rows must be probability vectors (entries in [0,1], sums within 1e-12).
  void validate() const {
    auto check = [](std::span<const double> d, const std::string& what) {
      double s = 0.0;
      for (double v : d) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(what + " has an entry outside [0,1]");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) throw ConfigError(what + " does not sum to 1");
    };
    for (std::size_t s = 0; s < n_states_; ++s)
      for (std::size_t a = 0; a < n_actions_; ++a)
        check(row(s, a), "P[" + std::to_string(s) + "][" + std::to_string(a) + "]");
    check(start_, "start distribution");
  }

 private:
  std::size_t offset(std::size_t s, std::size_t a) const {
    if (s >= n_states_ || a >= n_actions_) throw UsageError("tabular state/action index out of range");
    return (s * n_actions_ + a) * n_states_;
  }

  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<double> start_;
};

struct TabularStep {
  std::size_t next_state = 0;
  double reward = 0.0;
};

inline std::size_t sample_index(std::span<const double> dist, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (dist[k] <= 0.0) continue;
    acc += dist[k];
    last = k;
    if (u < acc) return k;
  }
  return last;
}

/// s' ~ P(. | s, a); reward R[s][a][s'].
inline TabularStep tabular_step(const TabularMDP& mdp, std::size_t s, std::size_t a, Rng& rng) {
  const std::size_t s2 = sample_index(mdp.row(s, a), rng);
  return {s2, mdp.r(s, a, s2)};
}

/// Episodic wrapper: one-hot observations, terminal states and a step limit.
class TabularEnv final : public Environment {
 public:
  TabularEnv(std::string name, TabularMDP mdp, std::vector<bool> terminal, int max_steps, std::uint64_t seed)
      : name_(std::move(name)), mdp_(std::move(mdp)), terminal_(std::move(terminal)), max_steps_(max_steps), rng_(seed) {
    mdp_.validate();
    if (terminal_.size() != mdp_.n_states()) throw ConfigError("terminal flags must cover every state");
    if (max_steps_ < 1) throw ConfigError("tabular max_steps must be >= 1");
    reset();
  }

  const TabularMDP& mdp() const { return mdp_; }

  std::string name() const override { return name_; }
  std::size_t observation_size() const override { return mdp_.n_states(); }
  std::size_t action_count() const override { return mdp_.n_actions(); }

  void reset() override {
    state_ = sample_index(mdp_.start(), rng_);
    steps_ = 0;
    done_ = false;
    encode();
  }

  StepOutcome step(std::size_t action) override {
    if (done_) throw UsageError("tabular step on a finished episode");
    if (action >= mdp_.n_actions()) throw UsageError("tabular action out of range");
    const TabularStep t = tabular_step(mdp_, state_, action, rng_);
    state_ = t.next_state;
    ++steps_;
    StepOutcome out{t.reward, false, false};
    if (terminal_[state_]) {
      out.done = true;
      out.success = true;
    } else if (steps_ >= max_steps_) {
      out.done = true;
    }
    done_ = out.done;
    encode();
    return out;
  }

  const std::vector<double>& observation() const override { return obs_; }
  bool done() const override { return done_; }
  int step_count() const override { return steps_; }
  int max_steps() const override { return max_steps_; }
  std::uint64_t visit_key() const override { return state_; }
  VisitCell visit_cell() const override { return {state_, 0}; }
  VisitCell visit_extent() const override { return {mdp_.n_states(), 1}; }
  std::optional<std::size_t> state_id() const override { return state_; }

 private:
  void encode() {
    obs_.assign(mdp_.n_states(), 0.0);
    obs_[state_] = 1.0;
  }

  std::string name_;
  TabularMDP mdp_;
  std::vector<bool> terminal_;
  int max_steps_;
  Rng rng_;
  std::size_t state_ = 0;
  int steps_ = 0;
  bool done_ = false;
  std::vector<double> obs_;
};

/**
 * Five-state chain with two controlling actions (left, right; deterministic,
 * clamped at the ends) and four duplicates that move left or right with
 * probability 1/2 regardless of which one is chosen. Under a uniform policy
 * the duplicates' rows equal the next-state marginal, so their causal effect
 * is zero while left/right have effect log 2. Entering state 4 pays 1 and
 * ends the episode.
 */
inline TabularMDP make_chain_noop_mdp() {
  constexpr std::size_t S = 5, A = 6;
  TabularMDP m(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t left = s == 0 ? 0 : s - 1;
    const std::size_t right = s + 1 < S ? s + 1 : s;
    m.p(s, 0, left) += 1.0;
    m.p(s, 1, right) += 1.0;
    for (std::size_t a = 2; a < A; ++a) {
      m.p(s, a, left) += 0.5;
      m.p(s, a, right) += 0.5;
    }
    for (std::size_t a = 0; a < A; ++a) m.r(s, a, S - 1) = s == S - 1 ? 0.0 : 1.0;
  }
  m.start().assign(S, 0.0);
  m.start()[0] = 1.0;
  return m;
}

}  // namespace cee::envs
