#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tasp {

/// Raised when tunables are inconsistent with each other or with the image.
class ParamError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on shape mismatches between images and label maps.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Integer pixel position; x is the column, y the row, origin top-left.
struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline int chebyshev(Pixel a, Pixel b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Dense per-pixel feature array, channel-interleaved row-major storage.
class FeatureImage {
public:
  FeatureImage() = default;

  FeatureImage(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1)
      throw DimensionError("feature image needs positive width, height and channel count");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  FeatureImage(int width, int height, int channels, std::vector<double> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 1 || height < 1 || channels < 1)
      throw DimensionError("feature image needs positive width, height and channel count");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
      throw DimensionError("feature data length does not match width*height*channels");
    for (double v : data_)
      if (!std::isfinite(v)) throw std::invalid_argument("feature values must be finite");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::span<const double> pixel(std::size_t index) const {
    return {data_.data() + index * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<const double> pixel(int x, int y) const { return pixel(index(x, y)); }

  double at(int x, int y, int c) const { return data_[index(x, y) * channels_ + c]; }
  double& at(int x, int y, int c) { return data_[index(x, y) * channels_ + c]; }

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Per-pixel superpixel index. A total partition of the image domain.
class LabelMap {
public:
  LabelMap() = default;

  LabelMap(int width, int height, int fill = 0) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw DimensionError("label map needs positive width and height");
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  LabelMap(int width, int height, std::vector<int> labels)
      : width_(width), height_(height), labels_(std::move(labels)) {
    if (width < 1 || height < 1) throw DimensionError("label map needs positive width and height");
    if (labels_.size() != static_cast<std::size_t>(width) * height)
      throw DimensionError("label data length does not match width*height");
    for (int l : labels_)
      if (l < 0) throw std::invalid_argument("labels must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  int operator()(int x, int y) const { return labels_[index(x, y)]; }
  int& operator()(int x, int y) { return labels_[index(x, y)]; }
  int operator[](std::size_t i) const { return labels_[i]; }
  int& operator[](std::size_t i) { return labels_[i]; }

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const int> data() const { return labels_; }
  std::span<int> data() { return labels_; }

  int max_label() const {
    return labels_.empty() ? -1 : *std::max_element(labels_.begin(), labels_.end());
  }

  bool same_shape(const LabelMap& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<int> labels_;
};

/// Renumbers labels to 0..K'-1 in order of first appearance (scan order).
/// Returns the number of distinct labels.
inline int compact_labels(LabelMap& labels) {
  const int max_label = labels.max_label();
  std::vector<int> remap(static_cast<std::size_t>(max_label) + 1, -1);
  int next = 0;
  for (int& l : labels.data()) {
    int& r = remap[static_cast<std::size_t>(l)];
    if (r < 0) r = next++;
    l = r;
  }
  return next;
}

/// Like compact_labels, but preserves the relative order of label values.
inline int compact_labels_ordered(LabelMap& labels) {
  const int max_label = labels.max_label();
  std::vector<int> remap(static_cast<std::size_t>(max_label) + 1, -1);
  for (int l : labels.data()) remap[static_cast<std::size_t>(l)] = 0;
  int next = 0;
  for (int& r : remap)
    if (r == 0) r = next++;
  for (int& l : labels.data()) l = remap[static_cast<std::size_t>(l)];
  return next;
}

struct SuperpixelStats {
  std::vector<double> mean_feature;
  Point barycenter;
  double variance = 0.0;
  std::size_t size = 0;
};

enum class Mode { Tasp, TaspNoUnicity, TaspNoTexture, Slic };

inline const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::Tasp: return "tasp";
    case Mode::TaspNoUnicity: return "no-unicity";
    case Mode::TaspNoTexture: return "no-texture";
    case Mode::Slic: return "slic";
  }
  return "?";
}

inline Mode parse_mode(const std::string& name) {
  if (name == "tasp") return Mode::Tasp;
  if (name == "no-unicity") return Mode::TaspNoUnicity;
  if (name == "no-texture") return Mode::TaspNoTexture;
  if (name == "slic") return Mode::Slic;
  throw ParamError("unknown mode '" + name + "' (expected tasp, no-unicity, no-texture or slic)");
}

inline bool uses_texture(Mode mode) { return mode == Mode::Tasp || mode == Mode::TaspNoUnicity; }
inline bool uses_adaptive_regularity(Mode mode) { return mode != Mode::Slic; }

struct TaspParams {
  int K = 250;
  double m = 0.1;
  double beta = 25.0;
  int N = 8;
  int patch_side = 5;
  int delta = 3;
  int outer_iterations = 10;
  int pm_iterations = 3;
  std::uint64_t seed = 0;
  Mode mode = Mode::Tasp;
  /// Keep PatchMatch fields between outer iterations instead of re-seeding.
  bool warm_start = false;
};

/// Throws ParamError naming the first violated constraint.
inline void validate_params(const TaspParams& p, int width, int height) {
  if (width < 1 || height < 1) throw ParamError("image must be at least 1x1");
  if (p.K < 2) throw ParamError("K must be >= 2");
  if (static_cast<long long>(p.K) > static_cast<long long>(width) * height)
    throw ParamError("K must not exceed the pixel count");
  if (p.patch_side < 3) throw ParamError("patch side must be >= 3");
  if (p.patch_side % 2 == 0) throw ParamError("patch side must be odd");
  if (p.N < 1) throw ParamError("N must be >= 1");
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw ParamError("beta must be > 0");
  if (!(p.m > 0.0) || !std::isfinite(p.m)) throw ParamError("m must be > 0");
  if (p.delta < 0) throw ParamError("delta must be >= 0");
  if (p.outer_iterations < 0) throw ParamError("outer iterations must be >= 0");
  if (p.pm_iterations < 0) throw ParamError("PatchMatch iterations must be >= 0");
}

/// Grid step s = round(sqrt(W*H/K)), at least 2.
inline int grid_step(int width, int height, int K) {
  if (K < 2) throw ParamError("K must be >= 2");
  const double area = static_cast<double>(width) * height;
  const int s = static_cast<int>(std::lround(std::sqrt(area / K)));
  return std::max(s, 2);
}

}  // namespace tasp
