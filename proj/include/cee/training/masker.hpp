#pragma once

#include <span>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/mask/causal_mask.hpp"
#include "cee/models/n_value.hpp"

namespace cee::training {

/// Builds the per-state mask from a frozen N-value network.
template <typename T>
class Masker {
 public:
  Masker(const models::NValueNetwork<T>* nvalue, mask::MaskConfig cfg, std::size_t n_actions, std::uint64_t seed)
      : nvalue_(nvalue), cfg_(cfg), n_actions_(n_actions), rng_(seed) {
    if (cfg_.mode != mask::MaskMode::Ppo) {
      if (nvalue_ == nullptr) throw ConfigError("mode " + mask::to_string(cfg_.mode) + " needs an N-value network");
      if (nvalue_->n_actions != n_actions) throw ConfigError("N-value network does not match the action count");
    }
  }

  const mask::MaskConfig& config() const { return cfg_; }

  mask::MaskDecision decide(std::span<const double> obs) {
    if (cfg_.mode == mask::MaskMode::Ppo) return {mask::MaskVector::all(n_actions_), {}, {}};
    return mask::build_mask(models::n_value_matrix(*nvalue_, obs), cfg_, &rng_);
  }

 private:
  const models::NValueNetwork<T>* nvalue_;
  mask::MaskConfig cfg_;
  std::size_t n_actions_;
  Rng rng_;
};

}  // namespace cee::training
