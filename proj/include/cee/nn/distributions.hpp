#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"

namespace cee::nn {

/// Probabilities below this are treated as zero when taking logs.
inline constexpr double kLogFloor = 1e-38;

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  if (logits.empty()) throw UsageError("softmax of empty vector");
  double m = static_cast<double>(logits[0]);
  for (T l : logits) m = std::max(m, static_cast<double>(l));
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  return softmax(std::span<const double>(logits));
}

template <typename T>
std::vector<double> log_softmax(std::span<const T> logits) {
  if (logits.empty()) throw UsageError("log_softmax of empty vector");
  double m = static_cast<double>(logits[0]);
  for (T l : logits) m = std::max(m, static_cast<double>(l));
  double s = 0.0;
  for (T l : logits) s += std::exp(static_cast<double>(l) - m);
  const double lse = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lse;
  return out;
}

inline double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

/// Inverse-CDF draw; consumes exactly one uniform variate per call.
inline std::size_t categorical_sample(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0 || !std::isfinite(p)) throw UsageError("categorical_sample: invalid probability");
    total += p;
  }
  if (!(total > 0.0)) throw UsageError("categorical_sample: probabilities are all zero");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace cee::nn
