#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tasp/core.hpp"

namespace tasp {

/// 8-bit interleaved RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool valid() const {
    return width >= 1 && height >= 1 && data.size() == static_cast<std::size_t>(width) * height * 3;
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// 8-bit single channel image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool valid() const {
    return width >= 1 && height >= 1 && data.size() == static_cast<std::size_t>(width) * height;
  }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

namespace detail {

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double eps = 216.0 / 24389.0;   // (6/29)^3
  constexpr double kappa = 24389.0 / 27.0;  // (29/3)^3
  return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

struct LabTable {
  // sRGB -> XYZ (D65). The reference white is the image of RGB white so that
  // white maps to a = b = 0 exactly.
  static constexpr double M[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                     {0.2126729, 0.7151522, 0.0721750},
                                     {0.0193339, 0.1191920, 0.9503041}};
  double linear[256];
  double white[3];

  LabTable() {
    for (int i = 0; i < 256; ++i) linear[i] = srgb_to_linear(i / 255.0);
    for (int r = 0; r < 3; ++r) white[r] = M[r][0] + M[r][1] + M[r][2];
  }
};

inline const LabTable& lab_table() {
  static const LabTable table;
  return table;
}

}  // namespace detail

/// CIELab (D65) of a single 8-bit sRGB triple.
inline std::array<double, 3> srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const auto& t = detail::lab_table();
  const double r = t.linear[r8], g = t.linear[g8], b = t.linear[b8];
  const auto& M = detail::LabTable::M;
  const double X = (M[0][0] * r + M[0][1] * g + M[0][2] * b) / t.white[0];
  const double Y = (M[1][0] * r + M[1][1] * g + M[1][2] * b) / t.white[1];
  const double Z = (M[2][0] * r + M[2][1] * g + M[2][2] * b) / t.white[2];
  const double fx = detail::lab_f(X), fy = detail::lab_f(Y), fz = detail::lab_f(Z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline FeatureImage rgb_to_lab(const RgbImage& image) {
  if (!image.valid()) throw DimensionError("invalid RGB image");
  FeatureImage out(image.width, image.height, 3);
  auto data = out.data();
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const auto lab = srgb_to_lab(image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]);
    data[3 * i] = lab[0];
    data[3 * i + 1] = lab[1];
    data[3 * i + 2] = lab[2];
  }
  return out;
}

/// Grayscale intensity mapped to L in [0, 100]; a = b = 0.
inline FeatureImage gray_to_feature(const GrayImage& image) {
  if (!image.valid()) throw DimensionError("invalid grayscale image");
  FeatureImage out(image.width, image.height, 3);
  auto data = out.data();
  for (std::size_t i = 0; i < image.data.size(); ++i) data[3 * i] = image.data[i] * 100.0 / 255.0;
  return out;
}

/// Alternative feature extractors plug in here (the default is plain CIELab).
using FeatureExtractor = std::function<FeatureImage(const RgbImage&)>;

/// Per-label mean, barycenter, variance and size. Labels must be 0..K-1 with
/// every label present; variance is the mean over channels of the
/// per-channel population variance.
inline std::vector<SuperpixelStats> compute_stats(const FeatureImage& features, const LabelMap& labels) {
  if (features.width() != labels.width() || features.height() != labels.height())
    throw DimensionError("features and labels differ in size");
  const int count = labels.max_label() + 1;
  const int channels = features.channels();
  const int width = features.width();
  std::vector<SuperpixelStats> stats(static_cast<std::size_t>(count));
  std::vector<double> sum_x(count, 0.0), sum_y(count, 0.0);
  std::vector<double> sums(static_cast<std::size_t>(count) * channels, 0.0);
  auto data = features.data();
  const std::size_t n = labels.size();

  for (std::size_t i = 0; i < n; ++i) {
    const int l = labels[i];
    stats[l].size++;
    sum_x[l] += static_cast<double>(i % width);
    sum_y[l] += static_cast<double>(i / width);
    for (int c = 0; c < channels; ++c) sums[static_cast<std::size_t>(l) * channels + c] += data[i * channels + c];
  }
  for (int l = 0; l < count; ++l) {
    auto& s = stats[l];
    if (s.size == 0) throw std::runtime_error("label " + std::to_string(l) + " has no pixels");
    const double inv = 1.0 / static_cast<double>(s.size);
    s.barycenter = {sum_x[l] * inv, sum_y[l] * inv};
    s.mean_feature.resize(channels);
    for (int c = 0; c < channels; ++c) s.mean_feature[c] = sums[static_cast<std::size_t>(l) * channels + c] * inv;
  }

  std::fill(sums.begin(), sums.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = labels[i];
    const auto& mean = stats[l].mean_feature;
    for (int c = 0; c < channels; ++c) {
      const double d = data[i * channels + c] - mean[c];
      sums[static_cast<std::size_t>(l) * channels + c] += d * d;
    }
  }
  for (int l = 0; l < count; ++l) {
    double v = 0.0;
    for (int c = 0; c < channels; ++c) v += sums[static_cast<std::size_t>(l) * channels + c];
    stats[l].variance = v / (static_cast<double>(stats[l].size) * channels);
  }
  return stats;
}

}  // namespace tasp
