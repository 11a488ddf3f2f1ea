#pragma once

#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <string>

#include "cee/core/error.hpp"
#include "cee/training/metric_row.hpp"

namespace cee::harness {

inline constexpr const char* kMetricsHeader =
    "step,episode_return_mean,episode_length_mean,success_rate,mean_mask_size,policy_loss,value_loss,entropy,"
    "inv_dyn_loss,nvalue_loss";

/// Shortest round-trip decimal, independent of the global locale.
inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw UsageError("number formatting failed");
  return std::string(buf.data(), end);
}

inline std::string format_row(const training::MetricRow& r) {
  std::string s = std::to_string(r.step);
  for (const std::optional<double>* f : {&r.episode_return_mean, &r.episode_length_mean, &r.success_rate,
                                         &r.mean_mask_size, &r.policy_loss, &r.value_loss, &r.entropy,
                                         &r.inv_dyn_loss, &r.nvalue_loss}) {
    s += ',';
    if (*f) s += format_number(**f);
  }
  return s;
}

/// CSV sink: header first, one row per call, flushed after every row.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write metrics '" + path + "'");
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }

  void write(const training::MetricRow& row) {
    if (last_step_ && row.step <= *last_step_)
      throw UsageError("metric steps must increase (" + std::to_string(row.step) + " after " +
                       std::to_string(*last_step_) + ")");
    out_ << format_row(row) << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing metrics '" + path_ + "'");
    last_step_ = row.step;
  }

 private:
  std::string path_;
  std::ofstream out_;
  std::optional<std::int64_t> last_step_;
};

}  // namespace cee::harness
