#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"
#include "cee/envs/grid_world.hpp"

namespace cee::envs {

/// A generated layout plus the region the agent may start in (inclusive bounds).
struct GridLayout {
  GridWorld world;
  int start_x0 = 1, start_y0 = 1, start_x1 = 1, start_y1 = 1;
};

namespace detail {

inline Color random_color(Rng& rng) { return static_cast<Color>(uniform_index(rng, kColorCount)); }

inline std::pair<int, int> random_empty(const GridWorld& w, Rng& rng, int x0, int y0, int x1, int y1) {
  for (int tries = 0; tries < 10000; ++tries) {
    const int x = x0 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(x1 - x0 + 1)));
    const int y = y0 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(y1 - y0 + 1)));
    if (w.at(x, y).type == ObjectType::Empty) return {x, y};
  }
  throw ConfigError("grid layout has no free cell in the requested region");
}

}  // namespace detail

/// One room (6x6 including walls): drop the target object next to the other object.
inline GridLayout make_put_next_layout(Rng& rng, int max_steps) {
  GridLayout L{GridWorld(6, 6, max_steps), 1, 1, 4, 4};
  L.world.wall_border();
  static constexpr std::array<ObjectType, 3> kinds{ObjectType::Key, ObjectType::Ball, ObjectType::Box};
  const ObjectType ta = kinds[uniform_index(rng, 3)];
  const Color ca = detail::random_color(rng);
  ObjectType tb;
  Color cb;
  do {
    tb = kinds[uniform_index(rng, 3)];
    cb = detail::random_color(rng);
  } while (tb == ta && cb == ca);
  // Keep the two objects apart so the task is not solved at placement.
  for (;;) {
    auto [xa, ya] = detail::random_empty(L.world, rng, 1, 1, 4, 4);
    auto [xb, yb] = detail::random_empty(L.world, rng, 1, 1, 4, 4);
    if (std::abs(xa - xb) + std::abs(ya - yb) >= 2) {
      L.world.at(xa, ya) = Cell{ta, ca};
      L.world.at(xb, yb) = Cell{tb, cb};
      break;
    }
  }
  L.world.set_mission({GridTask::PutNext, ta, ca, tb, cb});
  return L;
}

/**
 * Two rooms (8x6 including walls) split by a wall with a locked door.
 * The matching key lies in the left room, the box to pick up in the right room.
 */
inline GridLayout make_unlock_pickup_layout(Rng& rng, int max_steps) {
  constexpr int W = 8, H = 6, divider = 4;
  GridLayout L{GridWorld(W, H, max_steps), 1, 1, divider - 1, H - 2};
  GridWorld& w = L.world;
  w.wall_border();
  for (int y = 1; y < H - 1; ++y) w.at(divider, y) = Cell{ObjectType::Wall};
  const Color door_color = detail::random_color(rng);
  const int door_y = 1 + static_cast<int>(uniform_index(rng, H - 2));
  w.at(divider, door_y) = Cell{ObjectType::Door, door_color, DoorState::Locked};
  // Keep the cell in front of the door free so it can always be reached.
  auto [kx, ky] = detail::random_empty(w, rng, 1, 1, divider - 1, H - 2);
  while (kx == divider - 1 && ky == door_y) std::tie(kx, ky) = detail::random_empty(w, rng, 1, 1, divider - 1, H - 2);
  w.at(kx, ky) = Cell{ObjectType::Key, door_color};
  const Color box_color = detail::random_color(rng);
  auto [bx, by] = detail::random_empty(w, rng, divider + 1, 1, W - 2, H - 2);
  while (bx == divider + 1 && by == door_y) std::tie(bx, by) = detail::random_empty(w, rng, divider + 1, 1, W - 2, H - 2);
  w.at(bx, by) = Cell{ObjectType::Box, box_color};
  w.set_mission({GridTask::PickupTarget, ObjectType::Box, box_color, ObjectType::Empty, Color::Grey});
  return L;
}

/// Four rooms (9x9 including walls) joined by openings; walk up to the target object.
inline GridLayout make_four_rooms_layout(Rng& rng, int max_steps) {
  constexpr int N = 9, mid = 4;
  GridLayout L{GridWorld(N, N, max_steps), 1, 1, N - 2, N - 2};
  GridWorld& w = L.world;
  w.wall_border();
  for (int i = 1; i < N - 1; ++i) {
    w.at(mid, i) = Cell{ObjectType::Wall};
    w.at(i, mid) = Cell{ObjectType::Wall};
  }
  auto gap = [&](std::size_t lo) { return static_cast<int>(lo + uniform_index(rng, mid - 1)); };
  w.at(mid, gap(1)) = Cell{};
  w.at(mid, gap(mid + 1)) = Cell{};
  w.at(gap(1), mid) = Cell{};
  w.at(gap(mid + 1), mid) = Cell{};
  static constexpr std::array<ObjectType, 3> kinds{ObjectType::Key, ObjectType::Ball, ObjectType::Box};
  const ObjectType tt = kinds[uniform_index(rng, 3)];
  const Color tc = detail::random_color(rng);
  auto [tx, ty] = detail::random_empty(w, rng, 1, 1, N - 2, N - 2);
  w.at(tx, ty) = Cell{tt, tc};
  for (int k = 0; k < 2; ++k) {
    ObjectType dt;
    Color dc;
    do {
      dt = kinds[uniform_index(rng, 3)];
      dc = detail::random_color(rng);
    } while (dt == tt && dc == tc);
    auto [dx, dy] = detail::random_empty(w, rng, 1, 1, N - 2, N - 2);
    w.at(dx, dy) = Cell{dt, dc};
  }
  w.set_mission({GridTask::GoToTarget, tt, tc, ObjectType::Empty, Color::Grey});
  return L;
}

/**
 * Environment adapter: the layout is generated once per seed (or on every
 * reset when `randomize_layout` is set); the agent's start pose is drawn per
 * episode from the layout's start region.
 */
class GridEnv final : public Environment {
 public:
  using LayoutFn = std::function<GridLayout(Rng&, int)>;

  GridEnv(std::string name, LayoutFn layout, std::uint64_t seed, int max_steps = 100, bool randomize_layout = false)
      : name_(std::move(name)),
        layout_fn_(std::move(layout)),
        layout_rng_(mix_seed(seed, 1)),
        agent_rng_(mix_seed(seed, 2)),
        max_steps_(max_steps),
        randomize_layout_(randomize_layout) {
    layout_ = layout_fn_(layout_rng_, max_steps_);
    reset();
  }

  const GridWorld& world() const { return world_; }
  const GridLayout& layout() const { return layout_; }

  std::string name() const override { return name_; }
  std::size_t observation_size() const override { return world_.observation_size(); }
  std::size_t action_count() const override { return kGridActionCount; }

  void reset() override {
    if (randomize_layout_) layout_ = layout_fn_(layout_rng_, max_steps_);
    world_ = layout_.world;
    for (;;) {
      auto [x, y] = detail::random_empty(world_, agent_rng_, layout_.start_x0, layout_.start_y0, layout_.start_x1,
                                         layout_.start_y1);
      const int dir = static_cast<int>(uniform_index(agent_rng_, 4));
      world_.place_agent(x, y, dir);
      if (!starts_solved()) break;
    }
    world_.encode(obs_);
  }

  StepOutcome step(std::size_t action) override {
    if (action >= kGridActionCount) throw UsageError("grid action out of range");
    const GridStep s = world_.step(static_cast<GridAction>(action));
    if (s.changed) world_.encode(obs_);
    return {s.reward, s.done, s.success};
  }

  const std::vector<double>& observation() const override { return obs_; }
  bool done() const override { return world_.done(); }
  int step_count() const override { return world_.step_count(); }
  int max_steps() const override { return world_.max_steps(); }

  std::uint64_t visit_key() const override { return world_.state_hash(); }
  VisitCell visit_cell() const override {
    return {static_cast<std::size_t>(world_.agent_x()), static_cast<std::size_t>(world_.agent_y())};
  }
  VisitCell visit_extent() const override {
    return {static_cast<std::size_t>(world_.width()), static_cast<std::size_t>(world_.height())};
  }

 private:
  bool starts_solved() const {
    const Mission& m = world_.mission();
    if (m.task != GridTask::GoToTarget) return false;
    const int fx = world_.front_x(), fy = world_.front_y();
    return world_.in_bounds(fx, fy) && world_.at(fx, fy).type == m.target_type &&
           world_.at(fx, fy).color == m.target_color;
  }

  std::string name_;
  LayoutFn layout_fn_;
  Rng layout_rng_;
  Rng agent_rng_;
  int max_steps_;
  bool randomize_layout_;
  GridLayout layout_;
  GridWorld world_;
  std::vector<double> obs_;
};

}  // namespace cee::envs
