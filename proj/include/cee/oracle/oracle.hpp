#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/envs/tabular.hpp"
#include "cee/models/n_value.hpp"

namespace cee::oracle {

using envs::TabularMDP;

/// Reported in place of an infinite KL divergence (disjoint supports).
inline constexpr double kInfiniteKl = 1e9;

/// Row-stochastic policy matrix pi[s][a].
struct TabularPolicy {
  std::vector<std::vector<double>> probs;

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions) {
    return {std::vector<std::vector<double>>(n_states, std::vector<double>(n_actions, 1.0 / n_actions))};
  }

  double operator()(std::size_t s, std::size_t a) const { return probs.at(s).at(a); }

  void validate(const TabularMDP& mdp) const {
    if (probs.size() != mdp.n_states()) throw ConfigError("policy must have one row per state");
    for (const auto& row : probs) {
      if (row.size() != mdp.n_actions()) throw ConfigError("policy row has wrong length");
      double s = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("policy probability outside [0,1]");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-12) throw ConfigError("policy row does not sum to 1");
    }
  }
};

/// P^pi(s' | s) = sum_a pi(a|s) P(s'|s,a).
inline std::vector<double> next_state_marginal(const TabularMDP& mdp, const TabularPolicy& pi, std::size_t s) {
  std::vector<double> m(mdp.n_states(), 0.0);
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
    const double w = pi(s, a);
    if (w == 0.0) continue;
    const auto row = mdp.row(s, a);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += w * row[k];
  }
  return m;
}

/// D_KL(P(.|s,a) || P^pi(.|s)), with 0 log 0 = 0.
inline double exact_causal_effect(const TabularMDP& mdp, const TabularPolicy& pi, std::size_t s, std::size_t a) {
  const auto marginal = next_state_marginal(mdp, pi, s);
  const auto row = mdp.row(s, a);
  double kl = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] == 0.0) continue;
    if (marginal[k] <= 0.0) throw DomainError("causal effect: next state outside the policy marginal's support");
    kl += row[k] * std::log(row[k] / marginal[k]);
  }
  return kl;
}

/// Bayes inverse dynamics P^pi(a | s, s').
inline std::vector<double> exact_inverse_dynamics(const TabularMDP& mdp, const TabularPolicy& pi, std::size_t s,
                                                  std::size_t s_next) {
  const double denom = next_state_marginal(mdp, pi, s)[s_next];
  if (!(denom > 0.0)) throw DomainError("inverse dynamics: next state is unreachable under the policy");
  std::vector<double> out(mdp.n_actions());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = pi(s, a) * mdp.p(s, a, s_next) / denom;
  return out;
}

/// N(s, a_i, a_j) = sum_{s'} P(s'|s,a_i) log(P^pi(a_j|s,s') / pi(a_j|s)).
inline double exact_n_value(const TabularMDP& mdp, const TabularPolicy& pi, std::size_t s, std::size_t ai,
                            std::size_t aj) {
  const double prior = pi(s, aj);
  if (!(prior > 0.0)) throw DomainError("N-value: policy gives zero probability to a_j");
  const auto marginal = next_state_marginal(mdp, pi, s);
  const auto row = mdp.row(s, ai);
  double n = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] == 0.0) continue;
    if (!(marginal[k] > 0.0)) throw DomainError("N-value: next state outside the policy marginal's support");
    const double posterior = prior * mdp.p(s, aj, k) / marginal[k];
    if (!(posterior > 0.0)) throw DomainError("N-value: log of zero inverse-dynamics probability");
    n += row[k] * std::log(posterior / prior);
  }
  return n;
}

/// Full N x N matrix of exact N-values at state s.
inline std::vector<std::vector<double>> exact_n_matrix(const TabularMDP& mdp, const TabularPolicy& pi,
                                                       std::size_t s) {
  const std::size_t n = mdp.n_actions();
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      try {
        m[i][j] = exact_n_value(mdp, pi, s, i, j);
      } catch (const DomainError&) {
        m[i][j] = -kInfiniteKl;
      }
    }
  return m;
}

/// D_KL(P(.|s,a_i) || P(.|s,a_j)); kInfiniteKl when the support is not contained.
inline double exact_similarity(const TabularMDP& mdp, std::size_t s, std::size_t ai, std::size_t aj) {
  const auto p = mdp.row(s, ai);
  const auto q = mdp.row(s, aj);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) return kInfiniteKl;
    kl += p[k] * std::log(p[k] / q[k]);
  }
  return kl;
}

/**
 * N-value network that reproduces the exact matrices on one-hot tabular
 * observations: a single affine layer whose column s holds the flattened
 * exact N-matrix of state s (sentinel -kInfiniteKl where a log would diverge).
 */
template <typename T>
models::NValueNetwork<T> oracle_n_value_network(const TabularMDP& mdp, const TabularPolicy& pi) {
  const std::size_t S = mdp.n_states(), N = mdp.n_actions();
  models::NValueNetwork<T> nv;
  nv.n_actions = N;
  nv.net = nn::make_mlp<T>({S, N * N});
  for (std::size_t s = 0; s < S; ++s) {
    const auto m = exact_n_matrix(mdp, pi, s);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) nv.net.layers[0].weight(i * N + j, s) = static_cast<T>(m[i][j]);
  }
  return nv;
}

/// Dirichlet(alpha, ..., alpha) draw.
inline std::vector<double> dirichlet(Rng& rng, std::size_t n, double alpha = 1.0) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) {
    x = gamma_sample(rng, alpha);
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

/// Normalizes so the entries sum to 1 to within rounding, then fixes the residue on the largest entry.
inline void renormalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  std::size_t big = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] /= s;
    if (v[k] > v[big]) big = k;
  }
  s = 0.0;
  for (double x : v) s += x;
  v[big] += 1.0 - s;
}

/// MDP with Dirichlet(1) transition rows and a Dirichlet(1) start distribution.
inline TabularMDP random_mdp(Rng& rng, std::size_t n_states, std::size_t n_actions) {
  TabularMDP m(n_states, n_actions);
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto row = dirichlet(rng, n_states);
      renormalize(row);
      m.set_row(s, a, row);
    }
  m.start() = dirichlet(rng, n_states);
  renormalize(m.start());
  return m;
}

/// Full-support random policy (Dirichlet(1) rows, floored away from zero).
inline TabularPolicy random_policy(Rng& rng, std::size_t n_states, std::size_t n_actions) {
  TabularPolicy pi;
  for (std::size_t s = 0; s < n_states; ++s) {
    auto row = dirichlet(rng, n_actions);
    for (double& p : row) p += 1e-3;
    renormalize(row);
    pi.probs.push_back(std::move(row));
  }
  return pi;
}

/// Largest deviations found by the effect-diagonal and similarity identity sweeps.
struct IdentityReport {
  std::size_t mdps = 0;
  std::size_t checks = 0;
  double max_effect_vs_n = 0.0;
  double max_similarity_vs_n = 0.0;
  double max_marginal_norm_error = 0.0;
};

/// Checks C == N(s,a,a) and M == N(s,i,i) - N(s,i,j) on random MDPs with 2..max_dim states/actions.
inline IdentityReport identity_sweep(std::size_t n_mdps, std::uint64_t seed, std::size_t max_dim = 6) {
  Rng rng(seed);
  IdentityReport r;
  for (std::size_t t = 0; t < n_mdps; ++t) {
    const std::size_t ns = 2 + uniform_index(rng, max_dim - 1);
    const std::size_t na = 2 + uniform_index(rng, max_dim - 1);
    const TabularMDP mdp = random_mdp(rng, ns, na);
    const TabularPolicy pi = random_policy(rng, ns, na);
    ++r.mdps;
    for (std::size_t s = 0; s < ns; ++s) {
      const auto marginal = next_state_marginal(mdp, pi, s);
      double total = 0.0;
      for (double p : marginal) total += p;
      r.max_marginal_norm_error = std::max(r.max_marginal_norm_error, std::abs(total - 1.0));
      for (std::size_t i = 0; i < na; ++i) {
        const double nii = exact_n_value(mdp, pi, s, i, i);
        r.max_effect_vs_n = std::max(r.max_effect_vs_n, std::abs(exact_causal_effect(mdp, pi, s, i) - nii));
        for (std::size_t j = 0; j < na; ++j) {
          const double via_n = nii - exact_n_value(mdp, pi, s, i, j);
          r.max_similarity_vs_n = std::max(r.max_similarity_vs_n, std::abs(exact_similarity(mdp, s, i, j) - via_n));
          ++r.checks;
        }
      }
    }
  }
  return r;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("total_variation: size mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - q[k]);
  return 0.5 * d;
}

struct MarginalEffectReport {
  std::size_t zero_cases = 0;
  std::size_t positive_cases = 0;
  double max_zero_case_effect = 0.0;                // should be ~0
  double min_positive_case_effect = kInfiniteKl;    // should be > 0
};

/**
 * Random MDPs where one action per state is rewritten to equal the policy
 * marginal (C must be 0), plus every action at total-variation distance
 * >= tv_gap from the marginal (C must be positive).
 */
inline MarginalEffectReport marginal_effect_sweep(std::size_t n_mdps, std::uint64_t seed, double tv_gap = 0.1) {
  Rng rng(seed);
  MarginalEffectReport r;
  for (std::size_t t = 0; t < n_mdps; ++t) {
    const std::size_t ns = 2 + uniform_index(rng, 5);
    const std::size_t na = 2 + uniform_index(rng, 5);
    TabularMDP mdp = random_mdp(rng, ns, na);
    const TabularPolicy pi = random_policy(rng, ns, na);
    std::vector<std::size_t> tied(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      // row_k = sum_{a != k} pi_a row_a / (1 - pi_k) makes row_k equal the marginal.
      const std::size_t k = uniform_index(rng, na);
      tied[s] = k;
      std::vector<double> row(ns, 0.0);
      for (std::size_t a = 0; a < na; ++a) {
        if (a == k) continue;
        for (std::size_t s2 = 0; s2 < ns; ++s2) row[s2] += pi(s, a) * mdp.p(s, a, s2) / (1.0 - pi(s, k));
      }
      renormalize(row);
      mdp.set_row(s, k, row);
    }
    for (std::size_t s = 0; s < ns; ++s) {
      const auto marginal = next_state_marginal(mdp, pi, s);
      for (std::size_t a = 0; a < na; ++a) {
        const double c = exact_causal_effect(mdp, pi, s, a);
        if (a == tied[s]) {
          ++r.zero_cases;
          r.max_zero_case_effect = std::max(r.max_zero_case_effect, std::abs(c));
        } else if (total_variation(mdp.row(s, a), marginal) >= tv_gap) {
          ++r.positive_cases;
          r.min_positive_case_effect = std::min(r.min_positive_case_effect, c);
        }
      }
    }
  }
  return r;
}

}  // namespace cee::oracle
