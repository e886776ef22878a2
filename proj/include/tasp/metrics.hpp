#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "tasp/core.hpp"

namespace tasp {

struct EvalReport {
  double asa = 0.0;
  double f_measure = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t superpixel_count = 0;
};

struct BoundaryScore {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

inline double harmonic_f(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Achievable segmentation accuracy: (1/|I|) sum_i max_j |S_i ∩ G_j|.
inline double asa(const LabelMap& pred, const LabelMap& gt) {
  if (!pred.same_shape(gt)) throw DimensionError("prediction and ground truth differ in size");
  std::unordered_map<std::uint64_t, std::size_t> overlap;
  overlap.reserve(1024);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint64_t key = (static_cast<std::uint64_t>(pred[i]) << 32) | static_cast<std::uint32_t>(gt[i]);
    overlap[key]++;
  }
  std::unordered_map<int, std::size_t> best;
  for (auto [key, count] : overlap) {
    auto& b = best[static_cast<int>(key >> 32)];
    b = std::max(b, count);
  }
  std::size_t total = 0;
  for (auto [label, count] : best) total += count;
  return static_cast<double>(total) / static_cast<double>(pred.size());
}

/// Pixels whose label differs from their right or bottom neighbor.
inline std::vector<std::uint8_t> boundaries(const LabelMap& labels) {
  const int W = labels.width(), H = labels.height();
  std::vector<std::uint8_t> mask(labels.size(), 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int l = labels(x, y);
      if ((x + 1 < W && labels(x + 1, y) != l) || (y + 1 < H && labels(x, y + 1) != l))
        mask[labels.index(x, y)] = 1;
    }
  return mask;
}

namespace detail {

/// For each set pixel of `from`, whether some set pixel of `to` lies within
/// Chebyshev distance `tolerance`; returns the number of such pixels.
inline std::size_t matched_within(const std::vector<std::uint8_t>& from, const std::vector<std::uint8_t>& to, int W,
                                  int H, int tolerance) {
  // Summed-area table of `to`.
  std::vector<std::int64_t> sat(static_cast<std::size_t>(W + 1) * (H + 1), 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      sat[static_cast<std::size_t>(y + 1) * (W + 1) + x + 1] = to[static_cast<std::size_t>(y) * W + x] +
                                                              sat[static_cast<std::size_t>(y) * (W + 1) + x + 1] +
                                                              sat[static_cast<std::size_t>(y + 1) * (W + 1) + x] -
                                                              sat[static_cast<std::size_t>(y) * (W + 1) + x];
  std::size_t matched = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!from[static_cast<std::size_t>(y) * W + x]) continue;
      const int x0 = std::max(0, x - tolerance), x1 = std::min(W - 1, x + tolerance);
      const int y0 = std::max(0, y - tolerance), y1 = std::min(H - 1, y + tolerance);
      const std::int64_t n = sat[static_cast<std::size_t>(y1 + 1) * (W + 1) + x1 + 1] -
                             sat[static_cast<std::size_t>(y0) * (W + 1) + x1 + 1] -
                             sat[static_cast<std::size_t>(y1 + 1) * (W + 1) + x0] +
                             sat[static_cast<std::size_t>(y0) * (W + 1) + x0];
      if (n > 0) ++matched;
    }
  return matched;
}

}  // namespace detail

/// Boundary precision/recall/F with Chebyshev matching tolerance. An empty
/// boundary set scores 0 on its side, unless both sets are empty (perfect agreement).
inline BoundaryScore boundary_fmeasure(const LabelMap& pred, const LabelMap& gt, int tolerance = 2) {
  if (!pred.same_shape(gt)) throw DimensionError("prediction and ground truth differ in size");
  if (tolerance < 0) throw std::invalid_argument("tolerance must be >= 0");
  const auto bp = boundaries(pred);
  const auto bg = boundaries(gt);
  const std::size_t np = static_cast<std::size_t>(std::count(bp.begin(), bp.end(), 1));
  const std::size_t ng = static_cast<std::size_t>(std::count(bg.begin(), bg.end(), 1));
  if (np == 0 && ng == 0) return {1.0, 1.0, 1.0};
  BoundaryScore score;
  if (np > 0)
    score.precision =
        static_cast<double>(detail::matched_within(bp, bg, pred.width(), pred.height(), tolerance)) / np;
  if (ng > 0)
    score.recall = static_cast<double>(detail::matched_within(bg, bp, pred.width(), pred.height(), tolerance)) / ng;
  score.f_measure = harmonic_f(score.precision, score.recall);
  return score;
}

inline std::size_t count_superpixels(const LabelMap& labels) {
  std::vector<int> sorted(labels.data().begin(), labels.data().end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

inline EvalReport evaluate(const LabelMap& pred, const LabelMap& gt, int tolerance = 2) {
  const BoundaryScore b = boundary_fmeasure(pred, gt, tolerance);
  return {asa(pred, gt), b.f_measure, b.precision, b.recall, count_superpixels(pred)};
}

}  // namespace tasp
