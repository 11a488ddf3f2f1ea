#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/models/inverse_dynamics.hpp"

namespace cee::training {

/// Observation stored as (index, value) pairs; one-hot grid encodings are mostly zeros.
class CompactObs {
 public:
  CompactObs() = default;
  explicit CompactObs(std::span<const double> dense) : width_(static_cast<std::uint32_t>(dense.size())) {
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] != 0.0) {
        index_.push_back(static_cast<std::uint32_t>(i));
        value_.push_back(static_cast<float>(dense[i]));
      }
    }
  }

  std::size_t width() const { return width_; }

  std::vector<double> dense() const {
    std::vector<double> out(width_, 0.0);
    for (std::size_t k = 0; k < index_.size(); ++k) out[index_[k]] = value_[k];
    return out;
  }

 private:
  std::uint32_t width_ = 0;
  std::vector<std::uint32_t> index_;
  std::vector<float> value_;
};

/// Phase-1 transition: (s, a, s') plus the behavior distribution at s (empty means uniform).
struct ReplayItem {
  CompactObs obs;
  std::size_t action = 0;
  CompactObs next_obs;
  std::vector<float> behavior;
};

/// Fixed-capacity FIFO ring with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return added_; }

  void add(ReplayItem item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
    ++added_;
  }

  /// Item in insertion order, 0 = oldest retained.
  const ReplayItem& at(std::size_t k) const {
    if (k >= items_.size()) throw UsageError("replay index out of range");
    return items_[(head_ + k) % items_.size()];
  }

  std::size_t sample_index(Rng& rng) const {
    if (items_.empty()) throw UsageError("sampling from an empty replay buffer");
    return uniform_index(rng, items_.size());
  }

  /// Uniformly sampled batch (with replacement) and the matching behavior distributions.
  models::TransitionBatch sample(Rng& rng, std::size_t batch_size, std::size_t n_actions,
                                 std::vector<std::vector<double>>* behavior = nullptr) const {
    models::TransitionBatch b;
    if (behavior) behavior->clear();
    for (std::size_t k = 0; k < batch_size; ++k) {
      const ReplayItem& it = items_[sample_index(rng)];
      b.obs.push_back(it.obs.dense());
      b.actions.push_back(it.action);
      b.next_obs.push_back(it.next_obs.dense());
      if (behavior) {
        if (it.behavior.empty())
          behavior->emplace_back(n_actions, 1.0 / static_cast<double>(n_actions));
        else
          behavior->emplace_back(it.behavior.begin(), it.behavior.end());
      }
    }
    return b;
  }

 private:
  std::size_t capacity_;
  std::vector<ReplayItem> items_;
  std::size_t head_ = 0;
  std::uint64_t added_ = 0;
};

/// On-policy storage for one PPO update.
struct RolloutBuffer {
  std::vector<std::vector<double>> obs;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<bool> dones;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<std::vector<double>> log_masks;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }

  void add(std::vector<double> o, std::size_t a, double r, bool done, double logp, double v,
           std::vector<double> log_mask) {
    obs.push_back(std::move(o));
    actions.push_back(a);
    rewards.push_back(r);
    dones.push_back(done);
    log_probs.push_back(logp);
    values.push_back(v);
    log_masks.push_back(std::move(log_mask));
  }

  void clear() { *this = RolloutBuffer{}; }
};

}  // namespace cee::training
