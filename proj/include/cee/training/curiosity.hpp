#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "cee/core/error.hpp"

namespace cee::training {

/// Visit counts keyed by (discretized state, action).
class VisitCounter {
 public:
  explicit VisitCounter(std::size_t n_actions) : n_actions_(n_actions) {
    if (n_actions == 0) throw ConfigError("visit counter needs at least one action");
  }

  std::uint64_t visit(std::uint64_t state_key, std::size_t action) { return ++counts_[key(state_key, action)]; }

  std::uint64_t count(std::uint64_t state_key, std::size_t action) const {
    const auto it = counts_.find(key(state_key, action));
    return it == counts_.end() ? 0 : it->second;
  }

  std::size_t distinct() const { return counts_.size(); }

 private:
  std::uint64_t key(std::uint64_t s, std::size_t a) const {
    if (a >= n_actions_) throw UsageError("visit counter action out of range");
    return s * n_actions_ + a;
  }

  std::size_t n_actions_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
};

/// count(s, a)^(-1/2); the counter must already include this visit.
inline double curiosity_reward(const VisitCounter& counter, std::uint64_t state_key, std::size_t action) {
  const std::uint64_t n = counter.count(state_key, action);
  if (n == 0) throw UsageError("curiosity reward queried before the visit was counted");
  return 1.0 / std::sqrt(static_cast<double>(n));
}

}  // namespace cee::training
