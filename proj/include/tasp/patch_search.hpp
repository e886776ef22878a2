#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tasp/core.hpp"
#include "tasp/random.hpp"

namespace tasp {

/// Square patch of feature values gathered around a center pixel, with
/// out-of-bounds coordinates clamped to the nearest valid pixel.
struct Patch {
  Pixel center;
  int side = 0;
  int channels = 0;
  std::vector<double> values;  // row-major over the window, channel-interleaved
};

inline Patch extract_patch(const FeatureImage& features, Pixel center, int side) {
  if (!features.contains(center.x, center.y)) throw std::out_of_range("patch center outside image");
  if (side < 1 || side % 2 == 0) throw ParamError("patch side must be odd");
  const int half = side / 2;
  const int channels = features.channels();
  Patch patch{center, side, channels, {}};
  patch.values.reserve(static_cast<std::size_t>(side) * side * channels);
  for (int dy = -half; dy <= half; ++dy) {
    const int y = std::clamp(center.y + dy, 0, features.height() - 1);
    for (int dx = -half; dx <= half; ++dx) {
      const int x = std::clamp(center.x + dx, 0, features.width() - 1);
      for (double v : features.pixel(x, y)) patch.values.push_back(v);
    }
  }
  return patch;
}

/// (1/n) * ||a - b||_2 with n the number of patch entries.
inline double patch_feature_distance(const Patch& a, const Patch& b) {
  if (a.side != b.side || a.channels != b.channels || a.values.size() != b.values.size())
    throw DimensionError("patches differ in side or channel count");
  double ssd = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    ssd += d * d;
  }
  return std::sqrt(ssd) / static_cast<double>(a.values.size());
}

/// All patches of an image, precomputed as contiguous float rows so that the
/// search loop runs over aligned, padded vectors. Channels that are zero over
/// the whole image (e.g. a/b of a grayscale input) are dropped; they cannot
/// contribute to any distance.
class PatchBank {
public:
  static constexpr int kLanes = 8;  // horizontal_sum assumes 8

  PatchBank(const FeatureImage& features, int side)
      : width_(features.width()), height_(features.height()), side_(side) {
    if (side < 1 || side % 2 == 0) throw ParamError("patch side must be odd");
    const int channels = features.channels();
    auto data = features.data();
    std::vector<int> active;
    for (int c = 0; c < channels; ++c) {
      bool nonzero = false;
      for (std::size_t i = 0; i < features.pixel_count() && !nonzero; ++i)
        nonzero = data[i * channels + c] != 0.0;
      if (nonzero) active.push_back(c);
    }
    if (active.empty()) active.push_back(0);
    entries_ = side * side * channels;
    const int used = side * side * static_cast<int>(active.size());
    stride_ = (used + kLanes - 1) / kLanes * kLanes;
    values_.assign(features.pixel_count() * stride_, 0.0f);

    const int half = side / 2;
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        float* out = values_.data() + (static_cast<std::size_t>(y) * width_ + x) * stride_;
        for (int dy = -half; dy <= half; ++dy) {
          const int yy = std::clamp(y + dy, 0, height_ - 1);
          for (int dx = -half; dx <= half; ++dx) {
            const int xx = std::clamp(x + dx, 0, width_ - 1);
            const double* px = data.data() + (static_cast<std::size_t>(yy) * width_ + xx) * channels;
            for (int c : active) *out++ = static_cast<float>(px[c]);
          }
        }
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int side() const { return side_; }
  /// Patch size n (side^2 * channels of the source image).
  int entries() const { return entries_; }

  /// Squared L2 distance between the patches at two pixel indices.
  float ssd(std::size_t a, std::size_t b) const {
    const float* pa = values_.data() + a * stride_;
    const float* pb = values_.data() + b * stride_;
    Lanes acc{};
    for (int i = 0; i < stride_; i += kLanes) accumulate(acc, pa + i, pb + i);
    return horizontal_sum(acc);
  }

  /// Same value as ssd(), except that the scan may stop early and return a
  /// partial sum once it reaches `bound` (checked every two lane blocks).
  float ssd_bounded(std::size_t a, std::size_t b, float bound) const {
    const float* pa = values_.data() + a * stride_;
    const float* pb = values_.data() + b * stride_;
    Lanes acc{};
    int i = 0;
    for (; i + 2 * kLanes < stride_; i += 2 * kLanes) {
      accumulate(acc, pa + i, pb + i);
      accumulate(acc, pa + i + kLanes, pb + i + kLanes);
      const float partial = horizontal_sum(acc);
      if (partial >= bound) return partial;
    }
    for (; i < stride_; i += kLanes) accumulate(acc, pa + i, pb + i);
    return horizontal_sum(acc);
  }

  double distance_from_ssd(float ssd) const {
    return std::sqrt(static_cast<double>(ssd)) / static_cast<double>(entries_);
  }

private:
#if defined(__GNUC__)
  using Quad = float __attribute__((vector_size(4 * sizeof(float))));
  struct Lanes {
    Quad lo{}, hi{};
  };
  static Quad load(const float* p) {
    Quad v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
  static void accumulate(Lanes& acc, const float* a, const float* b) {
    const Quad dlo = load(a) - load(b);
    const Quad dhi = load(a + 4) - load(b + 4);
    acc.lo += dlo * dlo;
    acc.hi += dhi * dhi;
  }
  /// ((a0 + a4) + (a2 + a6)) + ((a1 + a5) + (a3 + a7))
  static float horizontal_sum(const Lanes& acc) {
    using Mask = int __attribute__((vector_size(4 * sizeof(int))));
    const Quad v = acc.lo + acc.hi;
#if defined(__clang__)
    const Quad w = v + __builtin_shufflevector(v, v, 2, 3, 0, 1);
#else
    const Quad w = v + __builtin_shuffle(v, Mask{2, 3, 0, 1});
#endif
    return w[0] + w[1];
  }
#else
  struct Lanes {
    float v[kLanes] = {};
  };
  static void accumulate(Lanes& acc, const float* a, const float* b) {
    for (int k = 0; k < kLanes; ++k) {
      const float d = a[k] - b[k];
      acc.v[k] += d * d;
    }
  }
  static float horizontal_sum(const Lanes& acc) {
    const auto& a = acc.v;
    return ((a[0] + a[4]) + (a[2] + a[6])) + ((a[1] + a[5]) + (a[3] + a[7]));
  }
#endif

  int width_ = 0;
  int height_ = 0;
  int side_ = 0;
  int entries_ = 0;
  int stride_ = 0;
  std::vector<float> values_;
};

/// Inclusive pixel rectangle.
struct Rect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool empty() const { return x1 < x0 || y1 < y0; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// Pixels within Chebyshev distance s of a (real-valued) barycenter.
inline Rect search_window(Point barycenter, int s, int width, int height) {
  return {std::max(0, static_cast<int>(std::ceil(barycenter.x - s))),
          std::max(0, static_cast<int>(std::ceil(barycenter.y - s))),
          std::min(width - 1, static_cast<int>(std::floor(barycenter.x + s))),
          std::min(height - 1, static_cast<int>(std::floor(barycenter.y + s)))};
}

/// Pixel position packed as (y << 16) | x; images are limited to 32767
/// pixels per side. -1 marks "no position".
inline constexpr std::int32_t pack_pixel(int x, int y) { return (y << 16) | x; }
inline constexpr int packed_x(std::int32_t p) { return p & 0xFFFF; }
inline constexpr int packed_y(std::int32_t p) { return p >> 16; }
inline constexpr int kMaxPackedSide = 32767;

/// Pixel lists (packed, scan order) and bounding boxes of every label.
struct RegionIndex {
  std::vector<std::vector<std::int32_t>> pixels;
  std::vector<Rect> bounds;

  explicit RegionIndex(const LabelMap& labels) {
    if (labels.width() > kMaxPackedSide || labels.height() > kMaxPackedSide)
      throw DimensionError("image side exceeds 32767 pixels");
    const int count = labels.max_label() + 1;
    pixels.resize(count);
    bounds.assign(count, Rect{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1});
    for (int y = 0; y < labels.height(); ++y)
      for (int x = 0; x < labels.width(); ++x) {
        const int l = labels(x, y);
        pixels[l].push_back(pack_pixel(x, y));
        Rect& b = bounds[l];
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  }
};

struct Match {
  Pixel position;
  double distance = 0.0;  // patch feature distance to the query patch
};

/// Matches of one query pixel inside one target superpixel.
struct CorrespondenceSet {
  Pixel query;
  int target_label = -1;
  std::vector<Match> matches;
};

/// N parallel nearest-neighbor fields over a window, constrained to one
/// superpixel. Entry (query, field) holds a packed pixel or -1.
struct WindowMatches {
  Rect window;
  int fields = 0;
  std::vector<std::int32_t> position;
  std::vector<float> ssd;

  std::size_t slot(int x, int y, int f) const {
    return (static_cast<std::size_t>(y - window.y0) * window.width() + (x - window.x0)) * fields + f;
  }
};

struct PatchSearchOptions {
  int fields = 8;      // N
  int delta = 3;       // Chebyshev exclusion radius around the query
  int iterations = 3;  // propagation / random-search sweeps
  std::uint64_t seed = 0;
};

/// Region-constrained PatchMatch. For each pixel of `window`, finds up to N
/// distinct pixels of superpixel `target` whose patches are close to the
/// query patch, all at Chebyshev distance > delta from the query. Field f uses
/// its own random stream derived from (seed, target, f); queries are
/// processed in a fixed scan order, so the result depends only on the inputs.
/// With `prior`, still-valid matches from an earlier search seed the fields.
inline WindowMatches match_window(const PatchBank& bank, const LabelMap& labels, const RegionIndex& regions,
                                  int target, Rect window, const PatchSearchOptions& opt,
                                  const WindowMatches* prior = nullptr) {
  const int N = opt.fields;
  const int width = labels.width(), height = labels.height();
  WindowMatches out;
  out.window = window;
  out.fields = N;
  if (window.empty()) return out;
  const int ww = window.width(), wh = window.height();
  const std::size_t slots = static_cast<std::size_t>(ww) * wh * N;
  out.position.assign(slots, -1);
  out.ssd.assign(slots, std::numeric_limits<float>::infinity());
  const auto& members = regions.pixels.at(static_cast<std::size_t>(target));
  if (members.empty()) return out;
  const Rect bbox = regions.bounds[static_cast<std::size_t>(target)];
  const double diameter = std::hypot(static_cast<double>(bbox.width()), static_cast<double>(bbox.height()));
  const int* label_data = labels.data().data();
  const int delta = opt.delta;

  std::vector<Rng> rngs;
  rngs.reserve(N);
  for (int f = 0; f < N; ++f)
    rngs.emplace_back(stream_seed({opt.seed, static_cast<std::uint64_t>(target), static_cast<std::uint64_t>(f)}));

  std::int32_t* pos = out.position.data();
  float* dist = out.ssd.data();

  auto taken = [&](std::int32_t c, std::size_t base) {
    const std::int32_t* p = pos + base;
    if (N == 8) return ((p[0] == c) | (p[1] == c) | (p[2] == c) | (p[3] == c) | (p[4] == c) | (p[5] == c) |
                        (p[6] == c) | (p[7] == c)) != 0;
    bool found = false;
    for (int g = 0; g < N; ++g) found |= p[g] == c;
    return found;
  };
  // Inside the target, outside the exclusion square, not held by another
  // field of the same query. Callers exclude the field's own current match.
  auto valid = [&](int cx, int cy, int qx, int qy, std::size_t base) {
    if (label_data[static_cast<std::size_t>(cy) * width + cx] != target) return false;
    if (std::abs(cx - qx) <= delta && std::abs(cy - qy) <= delta) return false;
    return !taken(pack_pixel(cx, cy), base);
  };

  std::vector<std::int32_t> scratch;
  for (int qy = window.y0; qy <= window.y1; ++qy) {
    for (int qx = window.x0; qx <= window.x1; ++qx) {
      const std::size_t base = out.slot(qx, qy, 0);
      const std::size_t q = static_cast<std::size_t>(qy) * width + qx;
      for (int f = 0; f < N; ++f) {
        Rng& rng = rngs[f];
        std::int32_t chosen = -1;
        if (prior && prior->fields == N && prior->window.contains(qx, qy)) {
          const std::int32_t c = prior->position[prior->slot(qx, qy, f)];
          if (c >= 0 && packed_x(c) < width && packed_y(c) < height && valid(packed_x(c), packed_y(c), qx, qy, base))
            chosen = c;
        }
        for (int attempt = 0; attempt < 16 && chosen < 0; ++attempt) {
          const std::int32_t c = members[rng.below(members.size())];
          if (valid(packed_x(c), packed_y(c), qx, qy, base)) chosen = c;
        }
        if (chosen < 0) {
          scratch.clear();
          for (std::int32_t c : members)
            if (valid(packed_x(c), packed_y(c), qx, qy, base)) scratch.push_back(c);
          if (!scratch.empty()) chosen = scratch[rng.below(scratch.size())];
        }
        if (chosen >= 0) {
          pos[base + f] = chosen;
          dist[base + f] = bank.ssd(q, static_cast<std::size_t>(packed_y(chosen)) * width + packed_x(chosen));
        }
      }
    }
  }

  std::vector<int> radii;
  for (double radius = diameter; radius >= 1.0; radius *= 0.5) radii.push_back(static_cast<int>(radius));

  for (int sweep = 0; sweep < opt.iterations; ++sweep) {
    const bool forward = sweep % 2 == 0;
    const int step = forward ? 1 : -1;
    const int ystart = forward ? window.y0 : window.y1, yend = forward ? window.y1 + 1 : window.y0 - 1;
    const int xstart = forward ? window.x0 : window.x1, xend = forward ? window.x1 + 1 : window.x0 - 1;
    const std::ptrdiff_t h_offset = -static_cast<std::ptrdiff_t>(step) * N;
    const std::ptrdiff_t v_offset = -static_cast<std::ptrdiff_t>(step) * ww * N;
    for (int qy = ystart; qy != yend; qy += step) {
      const bool has_v = window.contains(xstart, qy - step);
      for (int qx = xstart; qx != xend; qx += step) {
        const std::size_t base = out.slot(qx, qy, 0);
        const std::size_t q = static_cast<std::size_t>(qy) * width + qx;
        const bool has_h = qx != xstart;
        for (int f = 0; f < N; ++f) {
          // An exact match cannot be improved upon.
          if (dist[base + f] == 0.0f) continue;
          // Distinctness only needs checking once a candidate improves.
          auto try_candidate = [&](int cx, int cy) {
            if (pack_pixel(cx, cy) == pos[base + f]) return;
            const std::size_t c = static_cast<std::size_t>(cy) * width + cx;
            if (label_data[c] != target) return;
            if (std::abs(cx - qx) <= delta && std::abs(cy - qy) <= delta) return;
            const float d = bank.ssd_bounded(q, c, dist[base + f]);
            if (d < dist[base + f] && !taken(pack_pixel(cx, cy), base)) {
              dist[base + f] = d;
              pos[base + f] = pack_pixel(cx, cy);
            }
          };
          // Propagation: the neighbor's match shifted by the query offset.
          if (has_h) {
            const std::int32_t n = pos[static_cast<std::ptrdiff_t>(base + f) + h_offset];
            if (n >= 0) {
              const int cx = packed_x(n) + step;
              if (cx >= 0 && cx < width) try_candidate(cx, packed_y(n));
            }
          }
          if (has_v) {
            const std::int32_t n = pos[static_cast<std::ptrdiff_t>(base + f) + v_offset];
            if (n >= 0) {
              const int cy = packed_y(n) + step;
              if (cy >= 0 && cy < height) try_candidate(packed_x(n), cy);
            }
          }
          // Random search around the current best with halving radius.
          if (pos[base + f] < 0) continue;
          Rng& rng = rngs[f];
          for (int r : radii) {
            const std::int32_t best = pos[base + f];
            const auto [ox, oy] = rng.offset_pair(r);
            try_candidate(std::clamp(packed_x(best) + ox, bbox.x0, bbox.x1),
                          std::clamp(packed_y(best) + oy, bbox.y0, bbox.y1));
          }
        }
      }
    }
  }
  return out;
}

/// Matches of a single query in superpixel `target`. The search runs over the
/// target's (2s+1)x(2s+1) window (widened to contain the query), exactly as
/// during clustering, and returns the query's entry sorted by distance.
inline CorrespondenceSet find_matches(const FeatureImage& features, const LabelMap& labels, Pixel query, int target,
                                      const TaspParams& params) {
  if (features.width() != labels.width() || features.height() != labels.height())
    throw DimensionError("features and labels differ in size");
  if (!labels.contains(query.x, query.y)) throw std::out_of_range("query outside image");
  const RegionIndex regions(labels);
  if (target < 0 || target >= static_cast<int>(regions.pixels.size()) || regions.pixels[target].empty())
    throw std::invalid_argument("target superpixel is empty");
  double sx = 0.0, sy = 0.0;
  for (std::int32_t p : regions.pixels[target]) {
    sx += packed_x(p);
    sy += packed_y(p);
  }
  const double count = static_cast<double>(regions.pixels[target].size());
  const int s = grid_step(labels.width(), labels.height(), params.K);
  Rect window = search_window({sx / count, sy / count}, s, labels.width(), labels.height());
  window.x0 = std::min(window.x0, query.x);
  window.y0 = std::min(window.y0, query.y);
  window.x1 = std::max(window.x1, query.x);
  window.y1 = std::max(window.y1, query.y);

  const PatchBank bank(features, params.patch_side);
  const PatchSearchOptions opt{params.N, params.delta, params.pm_iterations, params.seed};
  const WindowMatches wm = match_window(bank, labels, regions, target, window, opt);

  CorrespondenceSet result{query, target, {}};
  for (int f = 0; f < wm.fields; ++f) {
    const std::size_t slot = wm.slot(query.x, query.y, f);
    const std::int32_t p = wm.position[slot];
    if (p < 0) continue;
    result.matches.push_back({{packed_x(p), packed_y(p)}, bank.distance_from_ssd(wm.ssd[slot])});
  }
  std::sort(result.matches.begin(), result.matches.end(), [](const Match& a, const Match& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return std::pair(a.position.y, a.position.x) < std::pair(b.position.y, b.position.x);
  });
  return result;
}

}  // namespace tasp
