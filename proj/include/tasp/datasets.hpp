#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tasp/core.hpp"
#include "tasp/features.hpp"
#include "tasp/io.hpp"
#include "tasp/patch_search.hpp"
#include "tasp/random.hpp"

namespace tasp {

/// Binary periodic stripes. Orientation is the direction of the stripe lines
/// in degrees (0 = horizontal stripes, i.e. bands stacked along y).
struct StripeParams {
  int orientation = 0;
  int period = 8;
  double duty = 0.5;
  double contrast = 1.0;
  int phase = 0;  // pixels, in [0, period)

  friend bool operator==(const StripeParams&, const StripeParams&) = default;
};

struct MosaicSpec {
  int width = 400;
  int height = 300;
  int region_count = 6;
  int min_region_size = 1000;
  /// Per-region stripe parameters; drawn from the seed when empty.
  std::vector<StripeParams> stripes;
  std::uint64_t seed = 0;
};

/// Minimum separation between stripe patterns of adjacent regions.
inline constexpr int kMinOrientationGap = 15;
inline constexpr double kMinPeriodRatio = 1.5;
inline constexpr int kMaxCompositeTextures = 10;

inline void validate_spec(const MosaicSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw ParamError("mosaic size must be positive");
  if (spec.region_count < 1) throw ParamError("region count must be >= 1");
  if (spec.min_region_size < 1) throw ParamError("minimum region size must be >= 1");
  if (static_cast<long long>(spec.region_count) * spec.min_region_size >
      static_cast<long long>(spec.width) * spec.height)
    throw ParamError("infeasible mosaic: region_count * min_region_size exceeds the image area");
  for (const auto& st : spec.stripes) {
    if (st.period < 2) throw ParamError("stripe period must be >= 2");
    if (!(st.duty > 0.0 && st.duty < 1.0)) throw ParamError("stripe duty cycle must be in (0, 1)");
    if (!(st.contrast >= 0.0 && st.contrast <= 1.0)) throw ParamError("stripe contrast must be in [0, 1]");
  }
}

inline bool stripes_distinct(const StripeParams& a, const StripeParams& b) {
  int diff = std::abs(((a.orientation - b.orientation) % 180 + 180) % 180);
  diff = std::min(diff, 180 - diff);
  const double ratio = static_cast<double>(std::max(a.period, b.period)) / std::min(a.period, b.period);
  return diff >= kMinOrientationGap || ratio >= kMinPeriodRatio;
}

/// Region adjacency (4-neighborhood) of a compacted label map.
inline std::vector<std::set<int>> region_adjacency(const LabelMap& labels) {
  std::vector<std::set<int>> adj(static_cast<std::size_t>(labels.max_label()) + 1);
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(x, y);
      if (x + 1 < labels.width() && labels(x + 1, y) != l) {
        adj[l].insert(labels(x + 1, y));
        adj[labels(x + 1, y)].insert(l);
      }
      if (y + 1 < labels.height() && labels(x, y + 1) != l) {
        adj[l].insert(labels(x, y + 1));
        adj[labels(x, y + 1)].insert(l);
      }
    }
  return adj;
}

inline constexpr int kPartitionAttempts = 32;

/// Irregular 4-connected regions from seeded competitive growth: each region
/// expands from a random seed at its own random speed over a shared random
/// cost field (integer Dijkstra, so the result is platform independent).
/// Growth is redrawn up to kPartitionAttempts times; regions still smaller
/// than min_region_size are then merged into the neighbor sharing the
/// longest boundary. Labels are compacted.
inline LabelMap gen_region_partition(const MosaicSpec& spec) {
  validate_spec(spec);
  const int W = spec.width, H = spec.height;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  LabelMap labels(W, H, 0);
  if (spec.region_count == 1) return labels;

  Rng rng(stream_seed({spec.seed, 1}));
  std::vector<std::uint8_t> noise(n);
  std::vector<std::int64_t> speed(static_cast<std::size_t>(spec.region_count));
  std::vector<char> seeded(n), done(n);
  using Entry = std::tuple<std::int64_t, std::int64_t, int>;  // cost, pixel, region
  for (int attempt = 0; attempt < kPartitionAttempts; ++attempt) {
    for (auto& v : noise) v = static_cast<std::uint8_t>(rng.range(1, 16));
    for (auto& w : speed) w = rng.range(2, 6);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    std::fill(seeded.begin(), seeded.end(), 0);
    std::fill(done.begin(), done.end(), 0);
    for (int r = 0; r < spec.region_count; ++r) {
      std::size_t p;
      do {
        p = static_cast<std::size_t>(rng.below(n));
      } while (seeded[p]);
      seeded[p] = 1;
      queue.emplace(0, static_cast<std::int64_t>(p), r);
    }
    while (!queue.empty()) {
      const auto [cost, pi, r] = queue.top();
      queue.pop();
      const std::size_t p = static_cast<std::size_t>(pi);
      if (done[p]) continue;
      done[p] = 1;
      labels[p] = r;
      const int x = static_cast<int>(p % W), y = static_cast<int>(p / W);
      const std::size_t nb[4] = {p - 1, p + 1, p - W, p + W};
      const bool ok[4] = {x > 0, x + 1 < W, y > 0, y + 1 < H};
      for (int k = 0; k < 4; ++k)
        if (ok[k] && !done[nb[k]])
          queue.emplace(cost + speed[static_cast<std::size_t>(r)] * noise[nb[k]], static_cast<std::int64_t>(nb[k]), r);
    }
    std::vector<std::size_t> size(static_cast<std::size_t>(spec.region_count), 0);
    for (int l : labels.data()) size[static_cast<std::size_t>(l)]++;
    if (*std::min_element(size.begin(), size.end()) >= static_cast<std::size_t>(spec.min_region_size)) break;
  }

  // Merge undersized regions, smallest first.
  for (;;) {
    const int count = labels.max_label() + 1;
    std::vector<std::size_t> size(static_cast<std::size_t>(count), 0);
    for (int l : labels.data()) size[static_cast<std::size_t>(l)]++;
    int smallest = -1;
    for (int l = 0; l < count; ++l)
      if (size[l] > 0 && size[l] < static_cast<std::size_t>(spec.min_region_size) &&
          (smallest < 0 || size[l] < size[smallest]))
        smallest = l;
    if (smallest < 0) break;
    std::map<int, std::size_t> shared;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int l = labels(x, y);
        if (x + 1 < W && labels(x + 1, y) != l) {
          if (l == smallest) shared[labels(x + 1, y)]++;
          if (labels(x + 1, y) == smallest) shared[l]++;
        }
        if (y + 1 < H && labels(x, y + 1) != l) {
          if (l == smallest) shared[labels(x, y + 1)]++;
          if (labels(x, y + 1) == smallest) shared[l]++;
        }
      }
    if (shared.empty()) break;
    int into = shared.begin()->first;
    for (auto [l, len] : shared)
      if (len > shared[into]) into = l;
    for (int& l : labels.data())
      if (l == smallest) l = into;
    compact_labels_ordered(labels);
  }
  compact_labels_ordered(labels);
  return labels;
}

/// Draws stripe parameters for every region so that adjacent regions are
/// distinct (orientation gap or period ratio).
inline std::vector<StripeParams> draw_stripe_params(const LabelMap& partition, std::uint64_t seed) {
  Rng rng(stream_seed({seed, 2}));
  const auto adj = region_adjacency(partition);
  std::vector<StripeParams> params(adj.size());
  for (std::size_t r = 0; r < adj.size(); ++r) {
    StripeParams candidate;
    for (int attempt = 0;; ++attempt) {
      candidate.orientation = 30 * rng.range(0, 5);
      candidate.period = rng.range(4, 12);
      candidate.duty = 0.4 + 0.1 * rng.range(0, 2);
      candidate.contrast = 1.0;
      candidate.phase = rng.range(0, candidate.period - 1);
      bool ok = true;
      for (int other : adj[r])
        if (static_cast<std::size_t>(other) < r && !stripes_distinct(candidate, params[static_cast<std::size_t>(other)]))
          ok = false;
      if (ok) break;
      if (attempt > 1000) throw std::runtime_error("could not draw distinct stripe parameters");
    }
    params[r] = candidate;
  }
  return params;
}

/// Stripe value at a pixel using fixed-point direction cosines.
class StripePattern {
public:
  explicit StripePattern(const StripeParams& p) : params_(p) {
    constexpr double kPi = 3.14159265358979323846;
    const double theta = p.orientation * kPi / 180.0;
    nx_ = -std::lround(std::sin(theta) * kScale);
    ny_ = std::lround(std::cos(theta) * kScale);
    span_ = static_cast<std::int64_t>(p.period) * kScale;
    on_ = std::llround(p.duty * static_cast<double>(span_));
    offset_ = static_cast<std::int64_t>(p.phase) * kScale;
    lo_ = static_cast<std::uint8_t>(std::lround(127.5 * (1.0 - p.contrast)));
    hi_ = static_cast<std::uint8_t>(255 - lo_);
  }

  bool bright(int x, int y) const {
    const std::int64_t t = x * nx_ + y * ny_ + offset_;
    return ((t % span_) + span_) % span_ < on_;
  }
  std::uint8_t value(int x, int y) const { return bright(x, y) ? hi_ : lo_; }

private:
  static constexpr std::int64_t kScale = 4096;
  StripeParams params_;
  std::int64_t nx_ = 0, ny_ = 0, span_ = 1, on_ = 0, offset_ = 0;
  std::uint8_t lo_ = 0, hi_ = 255;
};

struct Mosaic {
  GrayImage image;
  LabelMap ground_truth;
  std::vector<StripeParams> stripes;          // stripe mosaics
  std::vector<std::string> textures;          // composite mosaics: texture per region
};

/// Stripe mosaic over a seeded region partition. GT is the partition.
inline Mosaic gen_stripes(const MosaicSpec& spec) {
  validate_spec(spec);
  Mosaic out;
  out.ground_truth = gen_region_partition(spec);
  const std::size_t regions = static_cast<std::size_t>(out.ground_truth.max_label()) + 1;
  if (spec.stripes.empty()) {
    out.stripes = draw_stripe_params(out.ground_truth, spec.seed);
  } else {
    if (spec.stripes.size() < regions) throw ParamError("not enough stripe parameter sets for the regions");
    out.stripes.assign(spec.stripes.begin(), spec.stripes.begin() + static_cast<std::ptrdiff_t>(regions));
  }
  std::vector<StripePattern> patterns(out.stripes.begin(), out.stripes.end());
  out.image = GrayImage(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      out.image.at(x, y) = patterns[static_cast<std::size_t>(out.ground_truth(x, y))].value(x, y);
  return out;
}

struct NormalizeTarget {
  double mean = 0.5;
  double stddev = 0.2;
};

inline GrayImage to_gray(const Image& image) {
  if (const auto* g = std::get_if<GrayImage>(&image)) return *g;
  const auto& rgb = std::get<RgbImage>(image);
  GrayImage out(rgb.width, rgb.height);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(
        (299 * rgb.data[3 * i] + 587 * rgb.data[3 * i + 1] + 114 * rgb.data[3 * i + 2] + 500) / 1000);
  return out;
}

/// Image files of a texture directory, sorted by name.
inline std::vector<std::filesystem::path> list_textures(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = detail::lower_extension(entry.path());
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Composite mosaic: every region is filled with a random crop of a
/// different texture whose intensities over the region are normalized to
/// the target mean / standard deviation and clipped to [0, 1].
inline Mosaic gen_composite(const MosaicSpec& spec, const std::vector<std::filesystem::path>& textures,
                            NormalizeTarget target = {}) {
  validate_spec(spec);
  if (spec.region_count > kMaxCompositeTextures)
    throw ParamError("composite mosaics hold at most " + std::to_string(kMaxCompositeTextures) + " textures");
  if (textures.empty()) throw IoError("no texture images available");
  if (textures.size() < static_cast<std::size_t>(spec.region_count))
    throw IoError("need at least " + std::to_string(spec.region_count) + " textures, found " +
                  std::to_string(textures.size()));
  Mosaic out;
  out.ground_truth = gen_region_partition(spec);
  const int regions = out.ground_truth.max_label() + 1;
  const int W = spec.width, H = spec.height;

  std::vector<Rect> bounds(static_cast<std::size_t>(regions), Rect{W, H, -1, -1});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      Rect& b = bounds[static_cast<std::size_t>(out.ground_truth(x, y))];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }

  Rng rng(stream_seed({spec.seed, 3}));
  std::vector<std::size_t> order(textures.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  out.image = GrayImage(W, H);
  for (int r = 0; r < regions; ++r) {
    const auto& path = textures[order[static_cast<std::size_t>(r)]];
    const GrayImage tex = to_gray(read_image(path));
    const Rect& b = bounds[static_cast<std::size_t>(r)];
    if (tex.width < b.width() || tex.height < b.height())
      throw IoError(path.string() + ": texture too small for a " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + " crop");
    const int ox = rng.range(0, tex.width - b.width());
    const int oy = rng.range(0, tex.height - b.height());
    /// Integer moments of the crop over the region.
    std::int64_t sum = 0, sq = 0, count = 0;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        if (out.ground_truth(x, y) == r) {
          const std::int64_t v = tex.at(ox + x - b.x0, oy + y - b.y0);
          sum += v;
          sq += v * v;
          ++count;
        }
    const double n = static_cast<double>(count);
    const double mean = static_cast<double>(sum) / n / 255.0;
    const double sd = std::sqrt(static_cast<double>(count * sq - sum * sum)) / n / 255.0;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        if (out.ground_truth(x, y) == r) {
          double v = target.mean;
          if (sd > 0.0) v += target.stddev * (tex.at(ox + x - b.x0, oy + y - b.y0) / 255.0 - mean) / sd;
          out.image.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
    out.textures.push_back(path.filename().string());
  }
  return out;
}

inline Mosaic gen_composite(const MosaicSpec& spec, const std::filesystem::path& texture_dir,
                            NormalizeTarget target = {}) {
  const auto files = list_textures(texture_dir);
  if (files.empty()) throw IoError(texture_dir.string() + ": no texture images (png/pgm/ppm) found");
  return gen_composite(spec, files, target);
}

/// Procedural grayscale textures (gratings, checkers, blobs, dots, rings,
/// noise) for users without a texture library.
inline std::vector<GrayImage> gen_procedural_textures(int count, int width, int height, std::uint64_t seed) {
  constexpr double kPi = 3.14159265358979323846;
  std::vector<GrayImage> out;
  for (int t = 0; t < count; ++t) {
    Rng rng(stream_seed({seed, 4, static_cast<std::uint64_t>(t)}));
    GrayImage img(width, height);
    const int family = t % 6;
    const double freq = 0.15 + 0.35 * rng.uniform();
    const double angle = kPi * rng.uniform();
    const double ca = std::cos(angle), sa = std::sin(angle);
    // Smooth random field from a coarse lattice, bilinearly interpolated.
    const int cell = 4 + static_cast<int>(rng.below(8));
    const int gw = width / cell + 2, gh = height / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (auto& v : lattice) v = rng.uniform();
    auto smooth = [&](int x, int y) {
      const double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
      const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
      const double ax = fx - ix, ay = fy - iy;
      auto L = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gw + i]; };
      return (1 - ay) * ((1 - ax) * L(ix, iy) + ax * L(ix + 1, iy)) + ay * ((1 - ax) * L(ix, iy + 1) + ax * L(ix + 1, iy + 1));
    };
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double u = x * ca + y * sa, v = -x * sa + y * ca;
        const double grain = rng.uniform() - 0.5;
        double value = 0.5;
        switch (family) {
          case 0: value = 0.5 + 0.4 * std::sin(2 * kPi * freq * u) + 0.15 * grain; break;
          case 1: {
            const int period = 3 + static_cast<int>(freq * 20);
            value = ((static_cast<int>(std::floor(u / period)) + static_cast<int>(std::floor(v / period))) & 1) ? 0.8 : 0.2;
            value += 0.1 * grain;
            break;
          }
          case 2: value = smooth(x, y) + 0.1 * grain; break;
          case 3: {
            const double cx = std::fmod(u, 8.0 + 8 * freq) - 4.0, cy = std::fmod(v, 8.0 + 8 * freq) - 4.0;
            value = (cx * cx + cy * cy < 6.0 ? 0.85 : 0.25) + 0.1 * grain;
            break;
          }
          case 4: {
            const double r = std::hypot(x - width / 2.0, y - height / 2.0);
            value = 0.5 + 0.4 * std::sin(2 * kPi * freq * 0.5 * r + 3.0 * smooth(x, y));
            break;
          }
          default: value = 0.5 + 0.5 * grain + 0.3 * (smooth(x, y) - 0.5); break;
        }
        img.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
      }
    out.push_back(std::move(img));
  }
  return out;
}

/// External ground truth (16-bit PGM or CSV), labels compacted in order.
inline LabelMap load_ground_truth(const std::filesystem::path& path) {
  LabelMap labels = read_labels(path);
  compact_labels_ordered(labels);
  return labels;
}

}  // namespace tasp
