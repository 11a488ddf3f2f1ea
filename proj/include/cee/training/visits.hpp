#pragma once

#include <cstdint>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/envs/environment.hpp"

namespace cee::training {

/// Dense visitation counts over an environment's heatmap cells (row = y, column = x).
struct VisitGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint64_t> counts;

  VisitGrid() = default;
  VisitGrid(std::size_t w, std::size_t h) : width(w), height(h), counts(w * h, 0) {}
  explicit VisitGrid(const envs::Environment& env) : VisitGrid(env.visit_extent().x, env.visit_extent().y) {}

  std::uint64_t& at(std::size_t x, std::size_t y) {
    if (x >= width || y >= height) throw UsageError("visit cell out of range");
    return counts[y * width + x];
  }
  std::uint64_t at(std::size_t x, std::size_t y) const {
    if (x >= width || y >= height) throw UsageError("visit cell out of range");
    return counts[y * width + x];
  }

  void record(const envs::Environment& env) {
    const auto c = env.visit_cell();
    ++at(c.x, c.y);
  }

  std::size_t nonzero() const {
    std::size_t n = 0;
    for (auto c : counts) n += c != 0;
    return n;
  }
};

}  // namespace cee::training
