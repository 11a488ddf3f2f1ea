#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/nn/autodiff.hpp"
#include "cee/nn/distributions.hpp"

namespace cee::mask {

using Matrix = std::vector<std::vector<double>>;

/// Log-mask value of an eliminated action.
inline constexpr double kLogBlock = 1e8;

/// Per-action availability plus the additive log-mask (0 or -kLogBlock).
struct MaskVector {
  std::vector<bool> available;
  std::vector<double> log_mask;

  static MaskVector all(std::size_t n) { return {std::vector<bool>(n, true), std::vector<double>(n, 0.0)}; }
  static MaskVector none(std::size_t n) { return {std::vector<bool>(n, false), std::vector<double>(n, -kLogBlock)}; }

  std::size_t size() const { return available.size(); }
  std::size_t count() const { return static_cast<std::size_t>(std::count(available.begin(), available.end(), true)); }

  void set(std::size_t i, bool on) {
    available.at(i) = on;
    log_mask[i] = on ? 0.0 : -kLogBlock;
  }

  void validate() const {
    if (available.size() != log_mask.size()) throw InvariantError("mask flags and log-mask differ in length");
    for (std::size_t i = 0; i < available.size(); ++i)
      if (log_mask[i] != (available[i] ? 0.0 : -kLogBlock)) throw InvariantError("log-mask disagrees with flags");
    if (count() == 0) throw InvariantError("mask eliminates every action");
  }

  friend bool operator==(const MaskVector&, const MaskVector&) = default;
};

struct ActionClustering {
  std::vector<std::size_t> cluster_id;
  std::vector<std::vector<std::size_t>> clusters;  // members in ascending order; front() is the representative

  std::size_t n_actions() const { return cluster_id.size(); }
};

inline void require_square(const Matrix& m) {
  for (const auto& row : m)
    if (row.size() != m.size()) throw ConfigError("N-value matrix must be square");
}

/// c[i] = max(0, N[i][i]).
inline std::vector<double> causal_effects(const Matrix& nmat) {
  require_square(nmat);
  std::vector<double> c(nmat.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::max(0.0, nmat[i][i]);
  return c;
}

/// m[i][j] = N[i][i] - N[i][j].
inline Matrix similarity(const Matrix& nmat) {
  require_square(nmat);
  const std::size_t n = nmat.size();
  Matrix m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = nmat[i][i] - nmat[i][j];
  return m;
}

/**
 * Greedy representative clustering in ascending action order: action i joins
 * the first cluster whose representative r has max(m[i][r], m[r][i]) < eps,
 * otherwise it founds a new cluster.
 */
inline ActionClustering cluster_actions(const Matrix& m, double eps) {
  require_square(m);
  if (!(eps > 0.0)) throw ConfigError("clustering threshold must be positive");
  ActionClustering c;
  c.cluster_id.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    bool placed = false;
    for (std::size_t k = 0; k < c.clusters.size() && !placed; ++k) {
      const std::size_t r = c.clusters[k].front();
      if (std::max(m[i][r], m[r][i]) < eps) {
        c.clusters[k].push_back(i);
        c.cluster_id[i] = k;
        placed = true;
      }
    }
    if (!placed) {
      c.cluster_id[i] = c.clusters.size();
      c.clusters.push_back({i});
    }
  }
  return c;
}

enum class RelativeEffectForm { Softmax, Ratio };

inline RelativeEffectForm parse_relative_effect_form(std::string_view s) {
  if (s == "softmax") return RelativeEffectForm::Softmax;
  if (s == "ratio") return RelativeEffectForm::Ratio;
  throw ConfigError("relative_effect_form must be 'softmax' or 'ratio', got '" + std::string(s) + "'");
}

inline std::string to_string(RelativeEffectForm f) { return f == RelativeEffectForm::Softmax ? "softmax" : "ratio"; }

/**
 * Per-cluster normalized effects. Softmax form: exp(c_i/T) / sum_k exp(c_j/T).
 * Ratio form: c_i / sum_k c_j (uniform when the cluster's effects are all zero).
 */
inline std::vector<double> relative_effects(std::span<const double> c, const ActionClustering& clustering, double T,
                                            RelativeEffectForm form = RelativeEffectForm::Softmax) {
  if (!(T > 0.0)) throw ConfigError("temperature must be positive");
  if (c.size() != clustering.n_actions()) throw ConfigError("effects and clustering differ in size");
  std::vector<double> r(c.size());
  for (const auto& members : clustering.clusters) {
    if (form == RelativeEffectForm::Softmax) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i : members) mx = std::max(mx, c[i] / T);
      double s = 0.0;
      for (std::size_t i : members) s += std::exp(c[i] / T - mx);
      for (std::size_t i : members) r[i] = std::exp(c[i] / T - mx) / s;
    } else {
      double s = 0.0;
      for (std::size_t i : members) s += c[i];
      for (std::size_t i : members) r[i] = s > 0.0 ? c[i] / s : 1.0 / static_cast<double>(members.size());
    }
  }
  return r;
}

/// Available iff r[i] > tau; a cluster with no such action keeps its argmax (lowest index on ties).
inline MaskVector minimal_action_space(std::span<const double> r, const ActionClustering& clustering, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  MaskVector m = MaskVector::none(r.size());
  for (const auto& members : clustering.clusters) {
    std::size_t best = members.front();
    bool any = false;
    for (std::size_t i : members) {
      if (r[i] > tau) {
        m.set(i, true);
        any = true;
      }
      if (r[i] > r[best]) best = i;
    }
    if (!any) m.set(best, true);
  }
  return m;
}

/// Available iff c[i] > tau_abs; falls back to the global argmax when nothing qualifies.
inline MaskVector approximate_causal_space(std::span<const double> c, double tau_abs) {
  if (c.empty()) throw ConfigError("empty effect vector");
  MaskVector m = MaskVector::none(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] > tau_abs) m.set(i, true);
  if (m.count() == 0) m.set(nn::argmax(c), true);
  return m;
}

enum class MaskMode { Ppo, Cee, CeeWoc, Npm, NpmRandom };

inline MaskMode parse_mask_mode(std::string_view s) {
  if (s == "ppo") return MaskMode::Ppo;
  if (s == "cee") return MaskMode::Cee;
  if (s == "cee-woc") return MaskMode::CeeWoc;
  if (s == "npm") return MaskMode::Npm;
  if (s == "npm-random") return MaskMode::NpmRandom;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected cee, cee-woc, npm, npm-random or ppo)");
}

inline std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::Ppo: return "ppo";
    case MaskMode::Cee: return "cee";
    case MaskMode::CeeWoc: return "cee-woc";
    case MaskMode::Npm: return "npm";
    case MaskMode::NpmRandom: return "npm-random";
  }
  return "ppo";
}

/// One action per cluster: the lowest index (npm) or a uniformly drawn member (npm-random).
inline MaskVector baseline_mask(const ActionClustering& clustering, MaskMode mode, Rng* rng) {
  if (mode != MaskMode::Npm && mode != MaskMode::NpmRandom) throw UsageError("baseline_mask needs an NPM mode");
  MaskVector m = MaskVector::none(clustering.n_actions());
  for (const auto& members : clustering.clusters) {
    if (mode == MaskMode::Npm) {
      m.set(members.front(), true);
    } else {
      if (rng == nullptr) throw UsageError("npm-random needs an rng");
      m.set(members[uniform_index(*rng, members.size())], true);
    }
  }
  return m;
}

/// softmax(logits + log_mask).
template <typename T>
std::vector<double> masked_distribution(std::span<const T> logits, const MaskVector& mask) {
  if (logits.size() != mask.size()) throw ConfigError("logits and mask differ in length");
  if (mask.count() == 0) throw InvariantError("mask eliminates every action");
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<double>(logits[i]) + mask.log_mask[i];
  return nn::softmax(std::span<const double>(z));
}

inline std::vector<double> masked_distribution(const std::vector<double>& logits, const MaskVector& mask) {
  return masked_distribution(std::span<const double>(logits), mask);
}

/// Taped row-wise log of the masked distribution; `log_masks` holds one log-mask row per batch row.
template <typename T>
nn::Var<T> masked_log_softmax(nn::Var<T> logits, const nn::Tensor<T>& log_masks) {
  if (!logits.value().same_shape(log_masks)) throw ConfigError("logits and log-mask batch differ in shape");
  return nn::log_softmax(logits + logits.tape->constant(log_masks));
}

struct MaskConfig {
  MaskMode mode = MaskMode::Cee;
  double epsilon = 0.5;
  double tau = 0.8;
  double temperature = 1.0;
  double tau_abs = 0.1;
  RelativeEffectForm form = RelativeEffectForm::Softmax;

  friend bool operator==(const MaskConfig&, const MaskConfig&) = default;
};

/// A mask together with the intermediate quantities that produced it.
struct MaskDecision {
  MaskVector mask;
  std::vector<double> effects;
  ActionClustering clustering;
};

/**
 * Composes the pipeline for one state's N-value matrix:
 * cee: effects, similarity, clusters, relative effects, minimal space;
 * cee-woc: absolute threshold on effects; npm/npm-random: one per cluster;
 * ppo: everything available.
 */
inline MaskDecision build_mask(const Matrix& nmat, const MaskConfig& cfg, Rng* rng = nullptr) {
  MaskDecision d;
  const std::size_t n = nmat.size();
  if (cfg.mode == MaskMode::Ppo) {
    d.mask = MaskVector::all(n);
    return d;
  }
  d.effects = causal_effects(nmat);
  if (cfg.mode == MaskMode::CeeWoc) {
    d.mask = approximate_causal_space(d.effects, cfg.tau_abs);
    return d;
  }
  d.clustering = cluster_actions(similarity(nmat), cfg.epsilon);
  if (cfg.mode == MaskMode::Cee) {
    d.mask = minimal_action_space(relative_effects(d.effects, d.clustering, cfg.temperature, cfg.form), d.clustering,
                                  cfg.tau);
  } else {
    d.mask = baseline_mask(d.clustering, cfg.mode, rng);
  }
  return d;
}

}  // namespace cee::mask
