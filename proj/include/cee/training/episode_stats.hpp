#pragma once

#include <optional>

#include "cee/envs/environment.hpp"

namespace cee::training {

/// Running return/length/success over the episodes finished since the last flush.
class EpisodeTracker {
 public:
  void on_step(const envs::StepOutcome& o) {
    ret_ += o.reward;
    ++len_;
    if (o.done) {
      sum_return_ += ret_;
      sum_length_ += len_;
      successes_ += o.success;
      ++episodes_;
      ret_ = 0.0;
      len_ = 0;
    }
  }

  int episodes() const { return episodes_; }
  std::optional<double> mean_return() const { return avg(sum_return_); }
  std::optional<double> mean_length() const { return avg(static_cast<double>(sum_length_)); }
  std::optional<double> success_rate() const { return avg(static_cast<double>(successes_)); }

  void flush() {
    sum_return_ = 0.0;
    sum_length_ = 0;
    successes_ = 0;
    episodes_ = 0;
  }

 private:
  std::optional<double> avg(double total) const {
    if (episodes_ == 0) return std::nullopt;
    return total / episodes_;
  }

  double ret_ = 0.0;
  long len_ = 0;
  double sum_return_ = 0.0;
  long sum_length_ = 0;
  int successes_ = 0;
  int episodes_ = 0;
};

}  // namespace cee::training
