#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "tasp/core.hpp"
#include "tasp/features.hpp"
#include "tasp/parallel.hpp"
#include "tasp/patch_search.hpp"

namespace tasp {

/// Upper bound on variance/beta in the adaptive regularity exponent.
inline constexpr double kMaxRegularityExponent = 3.0;

struct ClusterState {
  LabelMap labels;
  std::vector<SuperpixelStats> stats;
  std::vector<double> m_i;
  int s = 2;
  int iteration = 0;
  /// For each superpixel, its index before the last compaction (-1 if new).
  std::vector<int> origin;

  std::size_t count() const { return stats.size(); }
};

/// m_i = m * exp(min(variance / beta, 3)).
inline double adaptive_regularity(double m, double variance, double beta) {
  return m * std::exp(std::min(variance / beta, kMaxRegularityExponent));
}

/// Spatial unicity penalty 2s^2 (1 - exp(-|a - b|^2 / s^2)), in [0, 2s^2).
inline double gamma(Point match, Point barycenter, int s) {
  const double s2 = static_cast<double>(s) * s;
  return 2.0 * s2 * (1.0 - std::exp(-squared_distance(match, barycenter) / s2));
}

/// Per-match texture term: patch distance plus the unicity penalty.
inline double match_term(double patch_distance, Point match, Point barycenter, double m_i, int s, bool unicity) {
  if (!unicity) return patch_distance;
  return patch_distance + (m_i * m_i) / (static_cast<double>(s) * s) * gamma(match, barycenter, s);
}

/// Average texture term over the matches of one query; 0 when there are none
/// or when the mode has no texture term.
inline double texture_distance(const CorrespondenceSet& matches, Point barycenter, double m_i, int s, Mode mode) {
  if (!uses_texture(mode) || matches.matches.empty()) return 0.0;
  const bool unicity = mode == Mode::Tasp;
  double total = 0.0;
  for (const Match& mt : matches.matches)
    total += match_term(mt.distance, {static_cast<double>(mt.position.x), static_cast<double>(mt.position.y)},
                        barycenter, m_i, s, unicity);
  return total / static_cast<double>(matches.matches.size());
}

namespace detail {

inline std::vector<double> regularities(const std::vector<SuperpixelStats>& stats, const TaspParams& params) {
  std::vector<double> m_i(stats.size(), params.m);
  if (uses_adaptive_regularity(params.mode))
    for (std::size_t i = 0; i < stats.size(); ++i) m_i[i] = adaptive_regularity(params.m, stats[i].variance, params.beta);
  return m_i;
}

}  // namespace detail

/// Regular grid of ceil(W/s) x ceil(H/s) blocks; the remainder is spread over
/// the blocks so every block is s or s-1..s+1 pixels wide.
inline ClusterState init_grid(const FeatureImage& features, const TaspParams& params) {
  validate_params(params, features.width(), features.height());
  const int W = features.width(), H = features.height();
  const int s = grid_step(W, H, params.K);
  const int nx = (W + s - 1) / s, ny = (H + s - 1) / s;
  ClusterState state;
  state.s = s;
  state.labels = LabelMap(W, H);
  for (int y = 0; y < H; ++y) {
    const int by = static_cast<int>(static_cast<long long>(y) * ny / H);
    for (int x = 0; x < W; ++x) {
      const int bx = static_cast<int>(static_cast<long long>(x) * nx / W);
      state.labels(x, y) = by * nx + bx;
    }
  }
  state.stats = compute_stats(features, state.labels);
  state.m_i.assign(state.stats.size(), params.m);
  state.origin.assign(state.stats.size(), -1);
  return state;
}

/// Texture distance d_P(p, S_i) for every pixel of every superpixel window.
struct TextureTerms {
  std::vector<Rect> windows;
  std::vector<std::vector<double>> values;
  /// Raw PatchMatch fields, kept for warm starts.
  std::vector<WindowMatches> fields;

  double at(std::size_t i, int x, int y) const {
    const Rect& w = windows[i];
    return values[i][static_cast<std::size_t>(y - w.y0) * w.width() + (x - w.x0)];
  }
};

inline TextureTerms compute_texture_terms(const PatchBank& bank, const ClusterState& state, const TaspParams& params,
                                          const TextureTerms* previous = nullptr) {
  const std::size_t K = state.count();
  const int W = state.labels.width(), H = state.labels.height();
  const int s = state.s;
  const bool unicity = params.mode == Mode::Tasp;
  const RegionIndex regions(state.labels);
  const PatchSearchOptions opt{params.N, params.delta, params.pm_iterations, params.seed};
  TextureTerms terms;
  terms.windows.resize(K);
  terms.values.resize(K);
  terms.fields.resize(K);
  parallel_for(K, [&](std::size_t i) {
    const Rect window = search_window(state.stats[i].barycenter, s, W, H);
    const WindowMatches* prior = nullptr;
    if (previous && i < state.origin.size() && state.origin[i] >= 0 &&
        static_cast<std::size_t>(state.origin[i]) < previous->fields.size())
      prior = &previous->fields[static_cast<std::size_t>(state.origin[i])];
    WindowMatches wm = match_window(bank, state.labels, regions, static_cast<int>(i), window, opt, prior);
    const Point bary = state.stats[i].barycenter;
    const double m_i = state.m_i[i];
    std::vector<double> values(static_cast<std::size_t>(window.width()) * window.height(), 0.0);
    std::size_t slot = 0;
    for (std::size_t q = 0; q < values.size(); ++q) {
      double total = 0.0;
      int found = 0;
      for (int f = 0; f < wm.fields; ++f, ++slot) {
        const std::int32_t p = wm.position[slot];
        if (p < 0) continue;
        const Point at{static_cast<double>(packed_x(p)), static_cast<double>(packed_y(p))};
        total += match_term(bank.distance_from_ssd(wm.ssd[slot]), at, bary, m_i, s, unicity);
        ++found;
      }
      values[q] = found > 0 ? total / found : 0.0;
    }
    terms.windows[i] = window;
    terms.values[i] = std::move(values);
    if (params.warm_start) terms.fields[i] = std::move(wm);
  });
  return terms;
}

/// Assigns every pixel to the candidate superpixel minimizing
/// d_F + d_s * m_i^2 / s^2 + d_P. Candidates are the superpixels whose
/// barycenter lies within Chebyshev distance s. Ties go to the lowest index;
/// pixels with no candidate keep their label. All superpixel data is read
/// from the frozen state, so rows can be processed in any order.
inline LabelMap assign(const FeatureImage& features, const ClusterState& state, const TaspParams& params,
                       const TextureTerms* texture) {
  const int W = features.width(), H = features.height();
  const int channels = features.channels();
  const std::size_t K = state.count();
  const double inv_s2 = 1.0 / (static_cast<double>(state.s) * state.s);
  const bool with_texture = texture != nullptr && uses_texture(params.mode);
  std::vector<Rect> windows(K);
  std::vector<double> spatial_weight(K);
  for (std::size_t i = 0; i < K; ++i) {
    windows[i] = search_window(state.stats[i].barycenter, state.s, W, H);
    spatial_weight[i] = state.m_i[i] * state.m_i[i] * inv_s2;
  }

  LabelMap out = state.labels;
  auto data = features.data();
  const int workers = worker_count();
  const int bands = std::max(1, std::min(workers, H));
  parallel_for(
      static_cast<std::size_t>(bands),
      [&](std::size_t band) {
        const int y0 = static_cast<int>(static_cast<long long>(H) * band / bands);
        const int y1 = static_cast<int>(static_cast<long long>(H) * (band + 1) / bands);
        if (y0 >= y1) return;
        std::vector<double> best(static_cast<std::size_t>(y1 - y0) * W, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < K; ++i) {
          const Rect& w = windows[i];
          const int ya = std::max(w.y0, y0), yb = std::min(w.y1, y1 - 1);
          if (ya > yb) continue;
          const SuperpixelStats& st = state.stats[i];
          const double* mean = st.mean_feature.data();
          for (int y = ya; y <= yb; ++y) {
            const double dy = y - st.barycenter.y;
            for (int x = w.x0; x <= w.x1; ++x) {
              const std::size_t p = static_cast<std::size_t>(y) * W + x;
              double fsq = 0.0;
              for (int c = 0; c < channels; ++c) {
                const double d = data[p * channels + c] - mean[c];
                fsq += d * d;
              }
              const double dx = x - st.barycenter.x;
              double D = std::sqrt(fsq) + std::sqrt(dx * dx + dy * dy) * spatial_weight[i];
              if (with_texture) D += texture->at(i, x, y);
              double& b = best[static_cast<std::size_t>(y - y0) * W + x];
              if (D < b) {
                b = D;
                out[p] = static_cast<int>(i);
              }
            }
          }
        }
      },
      workers);
  return out;
}

/// Convenience overload that runs the patch search itself when the mode needs it.
inline LabelMap assign(const FeatureImage& features, const ClusterState& state, const TaspParams& params) {
  if (!uses_texture(params.mode)) return assign(features, state, params, nullptr);
  const PatchBank bank(features, params.patch_side);
  const TextureTerms terms = compute_texture_terms(bank, state, params);
  return assign(features, state, params, &terms);
}

/// Drops empty superpixels (order-preserving compaction), recomputes
/// statistics and per-superpixel regularity.
inline ClusterState update(const FeatureImage& features, const LabelMap& labels, const TaspParams& params, int s,
                           int iteration = 0) {
  ClusterState state;
  state.s = s;
  state.iteration = iteration;
  state.labels = labels;
  const int max_label = labels.max_label();
  std::vector<char> present(static_cast<std::size_t>(max_label) + 1, 0);
  for (int l : labels.data()) present[static_cast<std::size_t>(l)] = 1;
  compact_labels_ordered(state.labels);
  for (int l = 0; l <= max_label; ++l)
    if (present[static_cast<std::size_t>(l)]) state.origin.push_back(l);
  state.stats = compute_stats(features, state.labels);
  state.m_i = detail::regularities(state.stats, params);
  return state;
}

/// Makes every label a single 4-connected region. Within each label the
/// largest component survives (if it has at least s^2/16 pixels); every other
/// component is merged, smallest first, into the neighboring region sharing
/// the longest boundary with it. Output labels are compacted in order.
inline LabelMap enforce_connectivity(const LabelMap& labels, int s) {
  const int W = labels.width(), H = labels.height();
  const std::size_t n = labels.size();
  std::vector<int> comp(n, -1);
  std::vector<int> comp_label;
  std::vector<std::size_t> comp_size;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_label.size());
    const int l = labels[start];
    std::size_t size = 0;
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int x = static_cast<int>(p % W), y = static_cast<int>(p / W);
      const std::size_t nb[4] = {p - 1, p + 1, p - W, p + W};
      const bool ok[4] = {x > 0, x + 1 < W, y > 0, y + 1 < H};
      for (int k = 0; k < 4; ++k)
        if (ok[k] && comp[nb[k]] < 0 && labels[nb[k]] == l) {
          comp[nb[k]] = id;
          stack.push_back(nb[k]);
        }
    }
    comp_label.push_back(l);
    comp_size.push_back(size);
  }
  const std::size_t C = comp_label.size();

  // Largest component per label (first in scan order on ties).
  std::map<int, int> keeper;
  for (std::size_t c = 0; c < C; ++c) {
    auto [it, inserted] = keeper.try_emplace(comp_label[c], static_cast<int>(c));
    if (!inserted && comp_size[c] > comp_size[static_cast<std::size_t>(it->second)]) it->second = static_cast<int>(c);
  }
  const std::size_t min_size = static_cast<std::size_t>(s) * s / 16;
  std::vector<char> keep(C, 0);
  for (auto [l, c] : keeper)
    if (comp_size[static_cast<std::size_t>(c)] >= min_size) keep[static_cast<std::size_t>(c)] = 1;

  // Component adjacency with shared boundary lengths.
  std::vector<std::map<int, std::size_t>> adjacency(C);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      if (x + 1 < W && comp[p] != comp[p + 1]) {
        adjacency[comp[p]][comp[p + 1]]++;
        adjacency[comp[p + 1]][comp[p]]++;
      }
      if (y + 1 < H && comp[p] != comp[p + W]) {
        adjacency[comp[p]][comp[p + W]]++;
        adjacency[comp[p + W]][comp[p]]++;
      }
    }

  std::vector<int> order;
  for (std::size_t c = 0; c < C; ++c)
    if (!keep[c]) order.push_back(static_cast<int>(c));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return comp_size[a] < comp_size[b]; });

  std::vector<int> parent(C);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> region_label = comp_label;
  for (int c : order) {
    auto& adj = adjacency[static_cast<std::size_t>(c)];
    if (adj.empty()) continue;  // nothing to merge into
    int target = -1;
    std::size_t longest = 0;
    for (auto [other, len] : adj)
      if (len > longest || (len == longest && target >= 0 && region_label[other] < region_label[target])) {
        target = other;
        longest = len;
      }
    parent[static_cast<std::size_t>(c)] = target;
    auto& tadj = adjacency[static_cast<std::size_t>(target)];
    tadj.erase(c);
    for (auto [other, len] : adj) {
      if (other == target) continue;
      tadj[other] += len;
      auto& oadj = adjacency[static_cast<std::size_t>(other)];
      oadj.erase(c);
      oadj[target] += len;
    }
    adj.clear();
    comp_size[static_cast<std::size_t>(target)] += comp_size[static_cast<std::size_t>(c)];
  }

  auto root = [&](int c) {
    while (parent[static_cast<std::size_t>(c)] != c) c = parent[static_cast<std::size_t>(c)];
    return c;
  };
  LabelMap out(W, H);
  for (std::size_t p = 0; p < n; ++p) out[p] = region_label[static_cast<std::size_t>(root(comp[p]))];
  compact_labels_ordered(out);
  return out;
}

struct SegmentResult {
  LabelMap labels;
  std::vector<SuperpixelStats> stats;
  std::vector<double> m_i;
  int s = 0;
};

/// Full pipeline on a feature image: grid init, then `outer_iterations`
/// rounds of patch search, assignment and update, then connectivity
/// enforcement and a final update.
inline SegmentResult segment(const FeatureImage& features, const TaspParams& params) {
  validate_params(params, features.width(), features.height());
  ClusterState state = init_grid(features, params);
  const int s = state.s;
  std::optional<PatchBank> bank;
  if (uses_texture(params.mode)) bank.emplace(features, params.patch_side);
  TextureTerms previous;
  for (int it = 0; it < params.outer_iterations; ++it) {
    LabelMap labels;
    if (bank) {
      TextureTerms terms = compute_texture_terms(*bank, state, params, params.warm_start ? &previous : nullptr);
      labels = assign(features, state, params, &terms);
      if (params.warm_start) previous = std::move(terms);
    } else {
      labels = assign(features, state, params, nullptr);
    }
    state = update(features, labels, params, s, it + 1);
  }
  const LabelMap connected = enforce_connectivity(state.labels, s);
  state = update(features, connected, params, s, state.iteration);
  return {std::move(state.labels), std::move(state.stats), std::move(state.m_i), s};
}

inline SegmentResult segment(const RgbImage& image, const TaspParams& params) {
  validate_params(params, image.width, image.height);
  return segment(rgb_to_lab(image), params);
}

inline SegmentResult segment(const GrayImage& image, const TaspParams& params) {
  validate_params(params, image.width, image.height);
  return segment(gray_to_feature(image), params);
}

}  // namespace tasp
