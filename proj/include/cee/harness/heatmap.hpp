#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/training/visits.hpp"

namespace cee::harness {

/// 8-bit gray levels floor(count * 255 / max); all zeros when max is 0.
inline std::vector<std::uint8_t> heatmap_levels(const training::VisitGrid& g) {
  const std::uint64_t mx = g.counts.empty() ? 0 : *std::max_element(g.counts.begin(), g.counts.end());
  std::vector<std::uint8_t> out(g.counts.size(), 0);
  if (mx == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((static_cast<unsigned __int128>(g.counts[i]) * 255) / mx);
  return out;
}

inline void write_heatmap_csv(const training::VisitGrid& g, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write heatmap '" + path + "'");
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) out << (x ? "," : "") << g.at(x, y);
    out << '\n';
  }
  if (!out) throw IoError("failed writing heatmap '" + path + "'");
}

/// Binary PGM (P5), row 0 = grid y 0.
inline void write_heatmap_pgm(const training::VisitGrid& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write heatmap '" + path + "'");
  out << "P5\n" << g.width << ' ' << g.height << "\n255\n";
  const auto levels = heatmap_levels(g);
  out.write(reinterpret_cast<const char*>(levels.data()), static_cast<std::streamsize>(levels.size()));
  if (!out) throw IoError("failed writing heatmap '" + path + "'");
}

/// Writes `<prefix>.csv` and `<prefix>.pgm`.
inline void export_heatmap(const training::VisitGrid& g, const std::string& prefix) {
  if (g.counts.empty()) throw UsageError("heatmap has no cells");
  write_heatmap_csv(g, prefix + ".csv");
  write_heatmap_pgm(g, prefix + ".pgm");
}

}  // namespace cee::harness
