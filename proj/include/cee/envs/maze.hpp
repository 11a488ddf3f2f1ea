#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"

namespace cee::envs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct MazeConfig {
  int n_actuators = 6;
  double step_size = 0.05;
  Vec2 goal_center{0.9, 0.9};
  double goal_radius = 0.1;
  Vec2 start{0.1, 0.1};
  int max_steps = 150;
  double motion_noise_std = 0.0;

  std::size_t action_count() const { return std::size_t{1} << n_actuators; }

  void validate() const {
    if (n_actuators < 1 || n_actuators > 16) throw ConfigError("maze: n_actuators must be in [1, 16]");
    if (!(step_size > 0.0)) throw ConfigError("maze: step_size must be positive");
    if (max_steps < 1) throw ConfigError("maze: max_steps must be >= 1");
    if (motion_noise_std < 0.0) throw ConfigError("maze: negative motion noise");
  }
};

struct MazeState {
  Vec2 position;
  int step_count = 0;
  bool done = false;
};

struct MazeStep {
  MazeState next;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

/// Unit direction of actuator i at angle 2*pi*i/n. Opposite actuators are exact negatives.
inline Vec2 actuator_direction(int i, int n) {
  if (n % 2 == 0 && i >= n / 2) {
    const Vec2 v = actuator_direction(i - n / 2, n);
    return {-v.x, -v.y};
  }
  const double theta = 2.0 * std::numbers::pi * i / n;
  auto snap = [](double v) { return std::abs(v) < 1e-12 ? 0.0 : v; };
  return {snap(std::cos(theta)), snap(std::sin(theta))};
}

/// Sum of the unit vectors of the actuators switched on in `bitmask`.
inline Vec2 actuator_sum(std::uint64_t bitmask, int n) {
  Vec2 d;
  for (int i = 0; i < n; ++i) {
    if (bitmask & (std::uint64_t{1} << i)) {
      const Vec2 u = actuator_direction(i, n);
      d.x += u.x;
      d.y += u.y;
    }
  }
  // Quantize so that equal vector sums reached through different bitmasks compare equal.
  auto q = [](double v) { return std::round(v * 1e12) / 1e12; };
  return {q(d.x), q(d.y)};
}

/**
 * One maze transition. The displacement is step_size times the raw vector
 * sum of the active actuators (plus optional Gaussian noise), clipped to the
 * unit square. Reaching the goal disc ends the episode with reward 1; hitting
 * max_steps ends it with reward 0.
 */
inline MazeStep maze_step(const MazeConfig& cfg, const MazeState& state, std::uint64_t bitmask, Rng* rng) {
  if (state.done) throw UsageError("maze_step on a finished episode");
  if (bitmask >= cfg.action_count())
    throw UsageError("maze action " + std::to_string(bitmask) + " out of range for " +
                     std::to_string(cfg.n_actuators) + " actuators");
  const Vec2 d = actuator_sum(bitmask, cfg.n_actuators);
  MazeStep out;
  out.next = state;
  double dx = cfg.step_size * d.x, dy = cfg.step_size * d.y;
  if (cfg.motion_noise_std > 0.0) {
    if (rng == nullptr) throw UsageError("maze_step: noise enabled but no rng supplied");
    dx += cfg.motion_noise_std * standard_normal(*rng);
    dy += cfg.motion_noise_std * standard_normal(*rng);
  }
  out.next.position.x = std::clamp(state.position.x + dx, 0.0, 1.0);
  out.next.position.y = std::clamp(state.position.y + dy, 0.0, 1.0);
  out.next.step_count = state.step_count + 1;
  const double gx = out.next.position.x - cfg.goal_center.x;
  const double gy = out.next.position.y - cfg.goal_center.y;
  if (gx * gx + gy * gy <= cfg.goal_radius * cfg.goal_radius) {
    out.reward = 1.0;
    out.success = true;
    out.done = true;
  } else if (out.next.step_count >= cfg.max_steps) {
    out.done = true;
  }
  out.next.done = out.done;
  return out;
}

class MazeEnv final : public Environment {
 public:
  static constexpr std::size_t kVisitBins = 20;

  MazeEnv(MazeConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    cfg_.validate();
    reset();
  }

  const MazeConfig& config() const { return cfg_; }
  const MazeState& state() const { return state_; }

  std::string name() const override { return "maze-" + std::to_string(cfg_.n_actuators); }
  std::size_t observation_size() const override { return 2; }
  std::size_t action_count() const override { return cfg_.action_count(); }

  void reset() override {
    state_ = MazeState{cfg_.start, 0, false};
    sync_observation();
  }

  StepOutcome step(std::size_t action) override {
    const MazeStep s = maze_step(cfg_, state_, action, &rng_);
    state_ = s.next;
    sync_observation();
    return {s.reward, s.done, s.success};
  }

  const std::vector<double>& observation() const override { return obs_; }
  bool done() const override { return state_.done; }
  int step_count() const override { return state_.step_count; }
  int max_steps() const override { return cfg_.max_steps; }

  std::uint64_t visit_key() const override {
    const VisitCell c = visit_cell();
    return c.y * kVisitBins + c.x;
  }
  VisitCell visit_cell() const override {
    auto bin = [](double v) {
      return std::min(kVisitBins - 1, static_cast<std::size_t>(v * static_cast<double>(kVisitBins)));
    };
    return {bin(state_.position.x), bin(state_.position.y)};
  }
  VisitCell visit_extent() const override { return {kVisitBins, kVisitBins}; }
  double transition_delta_scale() const override { return 1.0 / cfg_.step_size; }

 private:
  void sync_observation() { obs_ = {state_.position.x, state_.position.y}; }

  MazeConfig cfg_;
  Rng rng_;
  MazeState state_;
  std::vector<double> obs_;
};

}  // namespace cee::envs
