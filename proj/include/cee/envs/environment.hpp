#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cee::envs {

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

/// Heatmap cell for visitation counting (x = column, y = row).
struct VisitCell {
  std::size_t x = 0;
  std::size_t y = 0;
};

/**
 * Common step/reset surface over the maze, grid world and tabular MDPs.
 * Instances are single-threaded state machines that own their rng.
 */
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_count() const = 0;

  virtual void reset() = 0;
  /// Throws UsageError when called on a finished episode.
  virtual StepOutcome step(std::size_t action) = 0;

  virtual const std::vector<double>& observation() const = 0;
  virtual bool done() const = 0;
  virtual int step_count() const = 0;
  virtual int max_steps() const = 0;

  /// Discretized state for count-based curiosity.
  virtual std::uint64_t visit_key() const = 0;
  virtual VisitCell visit_cell() const = 0;
  /// Heatmap extent as (width, height).
  virtual VisitCell visit_extent() const = 0;

  /// Discrete state index when the environment is tabular.
  virtual std::optional<std::size_t> state_id() const { return std::nullopt; }

  /// Scale applied to (next - current) features fed to the inverse dynamics model.
  virtual double transition_delta_scale() const { return 1.0; }
};

}  // namespace cee::envs
