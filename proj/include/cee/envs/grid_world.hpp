#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/envs/environment.hpp"

namespace cee::envs {

enum class ObjectType : std::uint8_t { Empty, Wall, Floor, Door, Key, Ball, Box, Goal };
enum class Color : std::uint8_t { Red, Green, Blue, Purple, Yellow, Grey };
enum class DoorState : std::uint8_t { Open, Closed, Locked };
enum class GridAction : std::uint8_t { Left, Right, Forward, Pickup, Drop, Toggle, Done };

inline constexpr std::size_t kGridActionCount = 7;
inline constexpr std::size_t kColorCount = 6;

inline const char* action_name(GridAction a) {
  static constexpr std::array<const char*, kGridActionCount> names{"left", "right", "forward", "pickup",
                                                                   "drop", "toggle", "done"};
  return names[static_cast<std::size_t>(a)];
}

struct Cell {
  ObjectType type = ObjectType::Empty;
  Color color = Color::Grey;
  DoorState door = DoorState::Closed;

  bool can_overlap() const {
    return type == ObjectType::Empty || type == ObjectType::Floor || type == ObjectType::Goal ||
           (type == ObjectType::Door && door == DoorState::Open);
  }
  bool can_pickup() const {
    return type == ObjectType::Key || type == ObjectType::Ball || type == ObjectType::Box;
  }
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// What counts as success for a grid episode.
enum class GridTask : std::uint8_t {
  PutNext,       // drop `target` next to `other`
  PickupTarget,  // pick up `target`
  GoToTarget,    // face `target`
};

struct Mission {
  GridTask task = GridTask::GoToTarget;
  ObjectType target_type = ObjectType::Ball;
  Color target_color = Color::Green;
  ObjectType other_type = ObjectType::Empty;
  Color other_color = Color::Grey;
};

struct GridStep {
  double reward = 0.0;
  bool done = false;
  bool success = false;
  bool changed = false;  // false when the action was inapplicable
};

/**
 * Fully observed object grid world with MiniGrid action semantics.
 * Each cell holds at most one object; the agent carries at most one object.
 * Directions: 0 = east, 1 = south, 2 = west, 3 = north.
 */
class GridWorld {
 public:
  GridWorld() = default;
  GridWorld(int width, int height, int max_steps)
      : width_(width), height_(height), max_steps_(max_steps), cells_(static_cast<std::size_t>(width * height)) {
    if (width < 3 || height < 3) throw ConfigError("grid must be at least 3x3");
    if (max_steps < 1) throw ConfigError("grid max_steps must be >= 1");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int max_steps() const { return max_steps_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  int agent_x() const { return ax_; }
  int agent_y() const { return ay_; }
  int agent_dir() const { return dir_; }
  const std::optional<Cell>& carrying() const { return carrying_; }
  const Mission& mission() const { return mission_; }

  /// FNV-1a over every cell, the agent pose and the carried object.
  std::uint64_t state_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    for (const Cell& c : cells_)
      mix(static_cast<std::uint64_t>(c.type) << 16 | static_cast<std::uint64_t>(c.color) << 8 |
          static_cast<std::uint64_t>(c.door));
    mix(static_cast<std::uint64_t>((ay_ * width_ + ax_) * 4 + dir_));
    mix(carrying_ ? (static_cast<std::uint64_t>(carrying_->type) << 8 | static_cast<std::uint64_t>(carrying_->color)) + 1
                  : 0);
    return h;
  }

  Cell& at(int x, int y) { return cells_[index(x, y)]; }
  const Cell& at(int x, int y) const { return cells_[index(x, y)]; }

  void set_mission(Mission m) { mission_ = m; }
  void set_carrying(std::optional<Cell> c) { carrying_ = c; }
  void set_step_count(int n) { step_count_ = n; }

  void place_agent(int x, int y, int dir) {
    if (!in_bounds(x, y) || !at(x, y).can_overlap()) throw ConfigError("agent placed on a blocked cell");
    ax_ = x;
    ay_ = y;
    dir_ = ((dir % 4) + 4) % 4;
  }

  void wall_border() {
    for (int x = 0; x < width_; ++x) at(x, 0) = at(x, height_ - 1) = Cell{ObjectType::Wall};
    for (int y = 0; y < height_; ++y) at(0, y) = at(width_ - 1, y) = Cell{ObjectType::Wall};
  }

  int front_x() const { return ax_ + kDx[dir_]; }
  int front_y() const { return ay_ + kDy[dir_]; }

  /// True when the action would change the state (an inapplicable action is a no-op).
  bool is_applicable(GridAction a) const {
    const int fx = front_x(), fy = front_y();
    const bool front_ok = in_bounds(fx, fy);
    switch (a) {
      case GridAction::Left:
      case GridAction::Right:
        return true;
      case GridAction::Forward:
        return front_ok && at(fx, fy).can_overlap();
      case GridAction::Pickup:
        return front_ok && !carrying_ && at(fx, fy).can_pickup();
      case GridAction::Drop:
        return front_ok && carrying_ && at(fx, fy).type == ObjectType::Empty;
      case GridAction::Toggle: {
        if (!front_ok) return false;
        const Cell& c = at(fx, fy);
        if (c.type != ObjectType::Door) return false;
        if (c.door != DoorState::Locked) return true;
        return carrying_ && carrying_->type == ObjectType::Key && carrying_->color == c.color;
      }
      case GridAction::Done:
        return false;
    }
    return false;
  }

  /**
   * Applies one action. On success the reward is 1 - 0.9 * step_count / max_steps
   * (step_count counts this step); otherwise 0. Reaching max_steps ends the episode.
   */
  GridStep step(GridAction a) {
    if (done_) throw UsageError("grid step on a finished episode");
    GridStep out;
    ++step_count_;
    out.changed = is_applicable(a);
    const int fx = front_x(), fy = front_y();
    std::optional<Cell> dropped_at;
    if (out.changed) {
      switch (a) {
        case GridAction::Left: dir_ = (dir_ + 3) % 4; break;
        case GridAction::Right: dir_ = (dir_ + 1) % 4; break;
        case GridAction::Forward:
          ax_ = fx;
          ay_ = fy;
          break;
        case GridAction::Pickup:
          carrying_ = at(fx, fy);
          at(fx, fy) = Cell{};
          break;
        case GridAction::Drop:
          at(fx, fy) = *carrying_;
          dropped_at = *carrying_;
          carrying_.reset();
          break;
        case GridAction::Toggle: {
          Cell& c = at(fx, fy);
          c.door = c.door == DoorState::Open ? DoorState::Closed : DoorState::Open;
          break;
        }
        case GridAction::Done: break;
      }
    }
    out.success = mission_satisfied(a, out.changed, dropped_at);
    if (out.success) {
      out.reward = success_reward(step_count_, max_steps_);
      out.done = true;
    } else if (step_count_ >= max_steps_) {
      out.done = true;
    }
    done_ = out.done;
    return out;
  }

  static double success_reward(int step_count, int max_steps) {
    return 1.0 - (0.9 * step_count) / max_steps;
  }

  // Observation layout per cell: kTypeChannels type flags then kColorCount color flags.
  static constexpr std::size_t kTypeChannels = 11;
  static constexpr std::size_t kCellChannels = kTypeChannels + kColorCount;
  static constexpr std::size_t kCarryChannels = 3 + kColorCount;
  static constexpr std::size_t kMissionChannels = 2 * (3 + kColorCount);
  // egocentric copy of the cell in front of the agent
  static constexpr std::size_t kFrontChannels = kCellChannels;

  std::size_t observation_size() const {
    return cells_.size() * kCellChannels + 4 + kCarryChannels + kMissionChannels + kFrontChannels;
  }

  void encode(std::vector<double>& out) const {
    out.assign(observation_size(), 0.0);
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        double* c = out.data() + index(x, y) * kCellChannels;
        const Cell& cell = at(x, y);
        c[type_channel(cell)] = 1.0;
        if (cell.type != ObjectType::Empty) c[kTypeChannels + static_cast<std::size_t>(cell.color)] = 1.0;
        if (x == ax_ && y == ay_) c[kTypeChannels - 1] = 1.0;
      }
    }
    double* tail = out.data() + cells_.size() * kCellChannels;
    tail[dir_] = 1.0;
    tail += 4;
    if (carrying_) {
      tail[portable_slot(carrying_->type)] = 1.0;
      tail[3 + static_cast<std::size_t>(carrying_->color)] = 1.0;
    }
    tail += kCarryChannels;
    if (mission_.target_type != ObjectType::Empty && is_portable(mission_.target_type)) {
      tail[portable_slot(mission_.target_type)] = 1.0;
      tail[3 + static_cast<std::size_t>(mission_.target_color)] = 1.0;
    }
    tail += 3 + kColorCount;
    if (mission_.other_type != ObjectType::Empty && is_portable(mission_.other_type)) {
      tail[portable_slot(mission_.other_type)] = 1.0;
      tail[3 + static_cast<std::size_t>(mission_.other_color)] = 1.0;
    }
    tail += 3 + kColorCount;
    if (in_bounds(front_x(), front_y())) {
      const Cell& f = at(front_x(), front_y());
      tail[type_channel(f)] = 1.0;
      if (f.type != ObjectType::Empty) tail[kTypeChannels + static_cast<std::size_t>(f.color)] = 1.0;
    }
  }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

 private:
  static constexpr std::array<int, 4> kDx{1, 0, -1, 0};
  static constexpr std::array<int, 4> kDy{0, 1, 0, -1};

  std::size_t index(int x, int y) const {
    if (!in_bounds(x, y)) throw UsageError("grid coordinate out of range");
    return static_cast<std::size_t>(y * width_ + x);
  }

  static bool is_portable(ObjectType t) {
    return t == ObjectType::Key || t == ObjectType::Ball || t == ObjectType::Box;
  }
  static std::size_t portable_slot(ObjectType t) {
    return t == ObjectType::Key ? 0 : t == ObjectType::Ball ? 1 : 2;
  }

  // Channels: empty, wall, floor, door open/closed/locked, key, ball, box, goal, agent.
  static std::size_t type_channel(const Cell& c) {
    switch (c.type) {
      case ObjectType::Empty: return 0;
      case ObjectType::Wall: return 1;
      case ObjectType::Floor: return 2;
      case ObjectType::Door: return 3 + static_cast<std::size_t>(c.door);
      case ObjectType::Key: return 6;
      case ObjectType::Ball: return 7;
      case ObjectType::Box: return 8;
      case ObjectType::Goal: return 9;
    }
    return 0;
  }

  bool matches(const Cell& c, ObjectType t, Color col) const { return c.type == t && c.color == col; }

  bool mission_satisfied(GridAction a, bool changed, const std::optional<Cell>& dropped) const {
    switch (mission_.task) {
      case GridTask::GoToTarget: {
        if (!in_bounds(front_x(), front_y())) return false;
        const Cell& f = at(front_x(), front_y());
        if (mission_.target_type == ObjectType::Goal) return at(ax_, ay_).type == ObjectType::Goal;
        return matches(f, mission_.target_type, mission_.target_color);
      }
      case GridTask::PickupTarget:
        return a == GridAction::Pickup && changed && carrying_ &&
               matches(*carrying_, mission_.target_type, mission_.target_color);
      case GridTask::PutNext: {
        if (a != GridAction::Drop || !dropped || !matches(*dropped, mission_.target_type, mission_.target_color))
          return false;
        const int dx = front_x(), dy = front_y();
        for (int k = 0; k < 4; ++k) {
          const int nx = dx + kDx[k], ny = dy + kDy[k];
          if (in_bounds(nx, ny) && matches(at(nx, ny), mission_.other_type, mission_.other_color)) return true;
        }
        return false;
      }
    }
    return false;
  }

  int width_ = 0;
  int height_ = 0;
  int max_steps_ = 100;
  std::vector<Cell> cells_;
  int ax_ = 1;
  int ay_ = 1;
  int dir_ = 0;
  std::optional<Cell> carrying_;
  int step_count_ = 0;
  bool done_ = false;
  Mission mission_;
};

}  // namespace cee::envs
