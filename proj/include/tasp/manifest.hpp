#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tasp/datasets.hpp"
#include "tasp/io.hpp"
#include "tasp/parallel.hpp"
#include "tasp/random.hpp"

namespace tasp {

/// One generated image: its name and the exact spec that reproduces it.
struct ManifestEntry {
  std::string name;
  MosaicSpec spec;
  std::vector<std::string> textures;
};

/// Dataset description written next to the generated files as manifest.json.
struct DatasetManifest {
  std::string kind = "stripes";  // "stripes" or "composite"
  std::string texture_dir;
  NormalizeTarget normalize;
  std::vector<ManifestEntry> entries;
};

inline void to_json(nlohmann::json& j, const StripeParams& p) {
  j = {{"orientation", p.orientation}, {"period", p.period}, {"duty", p.duty}, {"contrast", p.contrast},
       {"phase", p.phase}};
}
inline void from_json(const nlohmann::json& j, StripeParams& p) {
  p.orientation = j.at("orientation").get<int>();
  p.period = j.at("period").get<int>();
  p.duty = j.at("duty").get<double>();
  p.contrast = j.value("contrast", 1.0);
  p.phase = j.value("phase", 0);
}

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = {{"name", e.name},
       {"seed", e.spec.seed},
       {"width", e.spec.width},
       {"height", e.spec.height},
       {"region_count", e.spec.region_count},
       {"min_region_size", e.spec.min_region_size}};
  if (!e.spec.stripes.empty()) j["stripes"] = e.spec.stripes;
  if (!e.textures.empty()) j["textures"] = e.textures;
}
inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  e.name = j.at("name").get<std::string>();
  e.spec.seed = j.at("seed").get<std::uint64_t>();
  e.spec.width = j.at("width").get<int>();
  e.spec.height = j.at("height").get<int>();
  e.spec.region_count = j.at("region_count").get<int>();
  e.spec.min_region_size = j.at("min_region_size").get<int>();
  e.spec.stripes = j.value("stripes", std::vector<StripeParams>{});
  e.textures = j.value("textures", std::vector<std::string>{});
}

inline void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = {{"format", "tasp-dataset-manifest"},
       {"version", 1},
       {"kind", m.kind},
       {"normalize", {{"mean", m.normalize.mean}, {"stddev", m.normalize.stddev}}},
       {"entries", m.entries}};
  if (!m.texture_dir.empty()) j["texture_dir"] = m.texture_dir;
}
inline void from_json(const nlohmann::json& j, DatasetManifest& m) {
  if (j.value("format", std::string{}) != "tasp-dataset-manifest") throw IoError("not a dataset manifest");
  m.kind = j.at("kind").get<std::string>();
  if (m.kind != "stripes" && m.kind != "composite") throw IoError("unknown dataset kind '" + m.kind + "'");
  m.texture_dir = j.value("texture_dir", std::string{});
  if (j.contains("normalize")) {
    m.normalize.mean = j["normalize"].value("mean", 0.5);
    m.normalize.stddev = j["normalize"].value("stddev", 0.2);
  }
  m.entries = j.at("entries").get<std::vector<ManifestEntry>>();
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in).get<DatasetManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << nlohmann::json(manifest).dump(2) << '\n';
}

struct BatchOptions {
  std::string kind = "stripes";
  int count = 10;
  int width = 400;
  int height = 300;
  int min_regions = 3;
  int max_regions = 8;
  int min_region_size = 1000;
  std::uint64_t seed = 0;
  std::string texture_dir;
  NormalizeTarget normalize;
};

/// Per-image seeds and region counts for a batch.
inline DatasetManifest plan_dataset(const BatchOptions& opt) {
  if (opt.count < 1) throw ParamError("dataset needs at least one image");
  if (opt.min_regions < 1 || opt.max_regions < opt.min_regions) throw ParamError("invalid region count range");
  DatasetManifest manifest;
  manifest.kind = opt.kind;
  manifest.texture_dir = opt.texture_dir;
  manifest.normalize = opt.normalize;
  Rng rng(stream_seed({opt.seed, 5}));
  for (int i = 0; i < opt.count; ++i) {
    ManifestEntry e;
    char name[32];
    std::snprintf(name, sizeof name, "%s_%03d", opt.kind.c_str(), i);
    e.name = name;
    e.spec.width = opt.width;
    e.spec.height = opt.height;
    e.spec.min_region_size = opt.min_region_size;
    e.spec.region_count = rng.range(opt.min_regions, opt.max_regions);
    e.spec.seed = stream_seed({opt.seed, static_cast<std::uint64_t>(i)});
    validate_spec(e.spec);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

/// Generates every manifest entry into dir/images (PNG) and dir/gt (16-bit
/// PGM and CSV), then writes dir/manifest.json with the resolved stripe
/// parameters / textures. Returns the resolved manifest.
inline DatasetManifest write_dataset(const std::filesystem::path& dir, DatasetManifest manifest) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "gt");
  std::vector<std::filesystem::path> textures;
  if (manifest.kind == "composite") {
    if (manifest.texture_dir.empty()) throw ParamError("composite datasets need a texture directory");
    textures = list_textures(manifest.texture_dir);
    if (textures.empty()) throw IoError(manifest.texture_dir + ": no texture images (png/pgm/ppm) found");
  }
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    ManifestEntry& e = manifest.entries[i];
    Mosaic mosaic =
        manifest.kind == "composite" ? gen_composite(e.spec, textures, manifest.normalize) : gen_stripes(e.spec);
    write_image(dir / "images" / (e.name + ".png"), mosaic.image);
    write_labels(mosaic.ground_truth, dir / "gt" / (e.name + ".pgm"), LabelFormat::Pgm16);
    write_labels(mosaic.ground_truth, dir / "gt" / (e.name + ".csv"), LabelFormat::Csv);
    if (manifest.kind == "stripes") e.spec.stripes = mosaic.stripes;
    e.textures = mosaic.textures;
  });
  write_manifest(manifest, dir / "manifest.json");
  return manifest;
}

/// An image with its ground truth inside a dataset directory.
struct DatasetItem {
  std::string name;
  std::filesystem::path image;
  std::filesystem::path ground_truth;
};

/// Pairs dir/images/<name>.{png,pgm,ppm} with dir/gt/<name>.{pgm,csv}.
inline std::vector<DatasetItem> list_dataset(const std::filesystem::path& dir) {
  const auto images = dir / "images";
  if (!std::filesystem::is_directory(images)) throw IoError(images.string() + ": not a directory");
  std::vector<DatasetItem> items;
  for (const auto& entry : std::filesystem::directory_iterator(images)) {
    const std::string ext = detail::lower_extension(entry.path());
    if (ext != ".png" && ext != ".pgm" && ext != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    std::filesystem::path gt = dir / "gt" / (stem + ".pgm");
    if (!std::filesystem::exists(gt)) gt = dir / "gt" / (stem + ".csv");
    if (!std::filesystem::exists(gt)) throw IoError("missing ground truth for " + entry.path().string());
    items.push_back({stem, entry.path(), gt});
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return items;
}

}  // namespace tasp
