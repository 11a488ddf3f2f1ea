#pragma once

#include <charconv>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/envs/environment.hpp"
#include "cee/envs/grid_tasks.hpp"
#include "cee/envs/maze.hpp"
#include "cee/envs/tabular.hpp"

namespace cee::envs {

inline constexpr int kChainNoopMaxSteps = 20;
// MiniGrid's 8 * room_size^2 horizon with room_size 6.
inline constexpr int kUnlockPickupMaxSteps = 288;

inline std::unique_ptr<TabularEnv> make_chain_noop_env(std::uint64_t seed) {
  std::vector<bool> terminal(5, false);
  terminal[4] = true;
  return std::make_unique<TabularEnv>("chain-noop", make_chain_noop_mdp(), terminal, kChainNoopMaxSteps, seed);
}

/**
 * Known ids: "maze-<n>" (n actuators), "put-next", "unlock-pickup",
 * "four-rooms-goto", "chain-noop". Layouts are a pure function of the seed.
 */
inline std::unique_ptr<Environment> make_task(std::string_view task_id, std::uint64_t seed) {
  if (task_id.starts_with("maze-")) {
    const std::string_view digits = task_id.substr(5);
    int n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
      throw UsageError("unknown task id '" + std::string(task_id) + "'");
    MazeConfig cfg;
    cfg.n_actuators = n;
    return std::make_unique<MazeEnv>(cfg, seed);
  }
  if (task_id == "put-next") return std::make_unique<GridEnv>("put-next", make_put_next_layout, seed);
  if (task_id == "unlock-pickup") return std::make_unique<GridEnv>("unlock-pickup", make_unlock_pickup_layout, seed,
                                                                       kUnlockPickupMaxSteps);
  if (task_id == "four-rooms-goto") return std::make_unique<GridEnv>("four-rooms-goto", make_four_rooms_layout, seed);
  if (task_id == "chain-noop") return make_chain_noop_env(seed);
  throw UsageError("unknown task id '" + std::string(task_id) + "'");
}

inline std::vector<std::string> known_tasks() {
  return {"maze-<n>", "put-next", "unlock-pickup", "four-rooms-goto", "chain-noop"};
}

}  // namespace cee::envs
