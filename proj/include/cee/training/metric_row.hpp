#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace cee::training {

/// One logging interval; unset fields are written as empty CSV cells.
struct MetricRow {
  std::int64_t step = 0;
  std::optional<double> episode_return_mean;
  std::optional<double> episode_length_mean;
  std::optional<double> success_rate;
  std::optional<double> mean_mask_size;
  std::optional<double> policy_loss;
  std::optional<double> value_loss;
  std::optional<double> entropy;
  std::optional<double> inv_dyn_loss;
  std::optional<double> nvalue_loss;
};

/// Mean success rate over the last `k` rows that finished at least one episode.
inline std::optional<double> final_success_rate(const std::vector<MetricRow>& rows, std::size_t k = 3) {
  double s = 0.0;
  std::size_t n = 0;
  for (auto it = rows.rbegin(); it != rows.rend() && n < k; ++it) {
    if (!it->success_rate) continue;
    s += *it->success_rate;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace cee::training
