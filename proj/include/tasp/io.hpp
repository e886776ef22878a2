#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tasp/core.hpp"
#include "tasp/features.hpp"
#include "tasp/metrics.hpp"

namespace tasp {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Image = std::variant<RgbImage, GrayImage>;

inline int image_width(const Image& image) {
  return std::visit([](const auto& im) { return im.width; }, image);
}
inline int image_height(const Image& image) {
  return std::visit([](const auto& im) { return im.height; }, image);
}

inline RgbImage to_rgb(const Image& image) {
  if (const auto* rgb = std::get_if<RgbImage>(&image)) return *rgb;
  const auto& gray = std::get<GrayImage>(image);
  RgbImage out(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.data.size(); ++i)
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = gray.data[i];
  return out;
}

inline FeatureImage to_features(const Image& image) {
  if (const auto* rgb = std::get_if<RgbImage>(&image)) return rgb_to_lab(*rgb);
  return gray_to_feature(std::get<GrayImage>(image));
}

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// Netpbm header parser (P5/P6): magic, width, height, maxval, then one
/// whitespace byte before the raster.
struct PnmHeader {
  char kind = 0;
  int width = 0, height = 0, maxval = 0;
  std::size_t offset = 0;
};

inline PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw IoError(name + ": not a binary PGM/PPM file");
  PnmHeader h;
  h.kind = static_cast<char>(bytes[1]);
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError(name + ": malformed header");
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1 << 24)) throw IoError(name + ": header value out of range");
    }
    return static_cast<int>(v);
  };
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(name + ": malformed header");
  h.offset = pos + 1;
  if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535) throw IoError(name + ": invalid dimensions");
  const std::size_t sample_bytes = h.maxval > 255 ? 2 : 1;
  const std::size_t needed =
      static_cast<std::size_t>(h.width) * h.height * (h.kind == '6' ? 3 : 1) * sample_bytes;
  if (bytes.size() - h.offset < needed) throw IoError(name + ": truncated raster");
  return h;
}

inline std::vector<int> pnm_samples(const std::vector<std::uint8_t>& bytes, const PnmHeader& h) {
  const std::size_t count = static_cast<std::size_t>(h.width) * h.height * (h.kind == '6' ? 3 : 1);
  std::vector<int> samples(count);
  const std::uint8_t* p = bytes.data() + h.offset;
  if (h.maxval > 255) {
    for (std::size_t i = 0; i < count; ++i) samples[i] = (p[2 * i] << 8) | p[2 * i + 1];
  } else {
    for (std::size_t i = 0; i < count; ++i) samples[i] = p[i];
  }
  return samples;
}

inline std::uint8_t rescale_to_8bit(int v, int maxval) {
  if (maxval == 255) return static_cast<std::uint8_t>(v);
  const long long clamped = std::min(v, maxval);
  return static_cast<std::uint8_t>((clamped * 255 + maxval / 2) / maxval);
}

inline Image read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const PnmHeader h = parse_pnm_header(bytes, path.string());
  const auto samples = pnm_samples(bytes, h);
  if (h.kind == '6') {
    RgbImage img(h.width, h.height);
    for (std::size_t i = 0; i < samples.size(); ++i) img.data[i] = rescale_to_8bit(samples[i], h.maxval);
    return img;
  }
  GrayImage img(h.width, h.height);
  for (std::size_t i = 0; i < samples.size(); ++i) img.data[i] = rescale_to_8bit(samples[i], h.maxval);
  return img;
}

inline Image read_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw IoError(path.string() + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError(path.string() + ": " + message);
  }
  const int w = static_cast<int>(png.width), h = static_cast<int>(png.height);
  if (color) {
    RgbImage img(w, h);
    img.data = std::move(buffer);
    return img;
  }
  GrayImage img(w, h);
  img.data = std::move(buffer);
  return img;
}

inline void write_png(const std::filesystem::path& path, const std::uint8_t* data, int w, int h, bool color) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(w);
  png.height = static_cast<png_uint_32>(h);
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, data, 0, nullptr))
    throw IoError(path.string() + ": " + png.message);
  std::string bytes(size, '\0');
  if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, data, 0, nullptr))
    throw IoError(path.string() + ": " + png.message);
  bytes.resize(size);
  write_file(path, bytes);
}

}  // namespace detail

/// Reads PNG or binary PGM/PPM (8 or 16 bit; 16-bit data is rescaled to 8 bit).
inline Image read_image(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return detail::read_pnm(path);
  throw IoError(path.string() + ": unsupported image format '" + ext + "'");
}

/// Writes PNG, PGM (gray) or PPM (color) according to the extension.
inline void write_image(const std::filesystem::path& path, const Image& image) {
  const std::string ext = detail::lower_extension(path);
  const bool color = std::holds_alternative<RgbImage>(image);
  if (ext == ".png") {
    std::visit([&](const auto& im) { detail::write_png(path, im.data.data(), im.width, im.height, color); }, image);
    return;
  }
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    if (ext == ".pgm" && color) throw IoError(path.string() + ": PGM cannot hold a color image");
    if (ext == ".ppm" && !color) return write_image(path, Image{to_rgb(image)});
    std::ostringstream out;
    std::visit(
        [&](const auto& im) {
          out << (color ? "P6\n" : "P5\n") << im.width << ' ' << im.height << "\n255\n";
          out.write(reinterpret_cast<const char*>(im.data.data()), static_cast<std::streamsize>(im.data.size()));
        },
        image);
    detail::write_file(path, out.str());
    return;
  }
  throw IoError(path.string() + ": unsupported image format '" + ext + "'");
}

enum class LabelFormat { Pgm16, Csv };

inline LabelFormat label_format_for(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".pgm") return LabelFormat::Pgm16;
  if (ext == ".csv") return LabelFormat::Csv;
  throw IoError(path.string() + ": unsupported label format '" + ext + "' (expected .pgm or .csv)");
}

inline std::string encode_labels(const LabelMap& labels, LabelFormat format) {
  std::ostringstream out;
  if (format == LabelFormat::Pgm16) {
    if (labels.max_label() > 65535) throw IoError("label overflow: 16-bit PGM holds at most 65536 labels");
    out << "P5\n" << labels.width() << ' ' << labels.height() << "\n65535\n";
    for (int l : labels.data()) {
      out.put(static_cast<char>((l >> 8) & 0xFF));
      out.put(static_cast<char>(l & 0xFF));
    }
  } else {
    for (int y = 0; y < labels.height(); ++y) {
      for (int x = 0; x < labels.width(); ++x) {
        if (x) out << ',';
        out << labels(x, y);
      }
      out << '\n';
    }
  }
  return out.str();
}

inline void write_labels(const LabelMap& labels, const std::filesystem::path& path, LabelFormat format) {
  detail::write_file(path, encode_labels(labels, format));
}

inline void write_labels(const LabelMap& labels, const std::filesystem::path& path) {
  write_labels(labels, path, label_format_for(path));
}

inline LabelMap parse_label_csv(const std::string& text, const std::string& name = "csv") {
  std::vector<int> values;
  int width = -1, height = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    int count = 0;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(cell, &used);
      } catch (const std::exception&) {
        throw IoError(name + ": bad value '" + cell + "' on row " + std::to_string(height + 1));
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos || v < 0)
        throw IoError(name + ": bad value '" + cell + "' on row " + std::to_string(height + 1));
      values.push_back(v);
      ++count;
    }
    if (width < 0) width = count;
    if (count != width) throw IoError(name + ": non-rectangular grid at row " + std::to_string(height + 1));
    ++height;
  }
  if (height == 0 || width <= 0) throw IoError(name + ": empty label grid");
  return LabelMap(width, height, std::move(values));
}

/// Reads a label map exactly as stored (no relabeling).
inline LabelMap read_labels(const std::filesystem::path& path) {
  if (label_format_for(path) == LabelFormat::Csv) {
    const auto bytes = detail::read_file(path);
    return parse_label_csv(std::string(bytes.begin(), bytes.end()), path.string());
  }
  const auto bytes = detail::read_file(path);
  const auto h = detail::parse_pnm_header(bytes, path.string());
  if (h.kind != '5') throw IoError(path.string() + ": label maps must be single-channel PGM");
  return LabelMap(h.width, h.height, detail::pnm_samples(bytes, h));
}

struct OverlayStyle {
  std::array<std::uint8_t, 3> color{255, 0, 0};
  int thickness = 1;
  bool mean_fill = false;
};

/// Paints superpixel boundaries over the image. With mean_fill, every
/// superpixel is first replaced by its mean color.
inline RgbImage render_overlay(const Image& image, const LabelMap& labels, const OverlayStyle& style = {}) {
  if (style.thickness != 1 && style.thickness != 2) throw std::invalid_argument("overlay thickness must be 1 or 2");
  RgbImage out = to_rgb(image);
  if (out.width != labels.width() || out.height != labels.height())
    throw DimensionError("image and labels differ in size");
  const int W = out.width, H = out.height;
  if (style.mean_fill) {
    const int count = labels.max_label() + 1;
    std::vector<std::array<std::uint64_t, 4>> sums(static_cast<std::size_t>(count), {0, 0, 0, 0});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto& s = sums[static_cast<std::size_t>(labels[i])];
      for (int c = 0; c < 3; ++c) s[c] += out.data[3 * i + c];
      s[3]++;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto& s = sums[static_cast<std::size_t>(labels[i])];
      for (int c = 0; c < 3; ++c) out.data[3 * i + c] = static_cast<std::uint8_t>((s[c] + s[3] / 2) / s[3]);
    }
  }
  auto mask = boundaries(labels);
  if (style.thickness == 2) {
    auto thick = mask;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        if (mask[static_cast<std::size_t>(y) * W + x]) {
          if (x + 1 < W) thick[static_cast<std::size_t>(y) * W + x + 1] = 1;
          if (y + 1 < H) thick[static_cast<std::size_t>(y + 1) * W + x] = 1;
        }
    mask = std::move(thick);
  }
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i])
      for (int c = 0; c < 3; ++c) out.data[3 * i + c] = style.color[c];
  return out;
}

}  // namespace tasp
