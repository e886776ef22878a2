#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tasp/tasp.hpp"

namespace tasp::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kFailure = 2 };

/// Report formats shared by eval and ablate.
enum class ReportFormat { Text, Csv, Json };

inline ReportFormat parse_format(const std::string& name) {
  if (name == "text") return ReportFormat::Text;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ParamError("unknown report format '" + name + "' (expected text, csv or json)");
}

/// Flags of the `segment` subcommand, also reused by `ablate`.
struct SegmentFlags {
  TaspParams params;
  std::string mode = "tasp";
};

inline void add_param_flags(CLI::App& cmd, SegmentFlags& f, bool with_mode) {
  cmd.add_option("--k", f.params.K, "Target superpixel count")->capture_default_str();
  cmd.add_option("--m", f.params.m, "Base regularity m")->capture_default_str();
  cmd.add_option("--beta", f.params.beta, "Variance scale beta")->capture_default_str();
  cmd.add_option("--n-matches", f.params.N, "Patch matches per pixel (N)")->capture_default_str();
  cmd.add_option("--patch-side", f.params.patch_side, "Odd patch side")->capture_default_str();
  cmd.add_option("--delta", f.params.delta, "Chebyshev exclusion radius around the query")->capture_default_str();
  cmd.add_option("--iters", f.params.outer_iterations, "Clustering iterations")->capture_default_str();
  cmd.add_option("--pm-iters", f.params.pm_iterations, "PatchMatch sweeps per iteration")->capture_default_str();
  cmd.add_option("--seed", f.params.seed, "Random seed")->capture_default_str();
  cmd.add_flag("--warm-start", f.params.warm_start, "Keep PatchMatch fields across iterations");
  if (with_mode)
    cmd.add_option("--mode", f.mode, "tasp, no-unicity, no-texture or slic")
        ->capture_default_str()
        ->check(CLI::IsMember({"tasp", "no-unicity", "no-texture", "slic"}));
}

inline std::array<std::uint8_t, 3> parse_color(const std::string& text) {
  std::array<std::uint8_t, 3> rgb{};
  std::istringstream in(text);
  std::string part;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(in, part, ',')) throw ParamError("color must be R,G,B");
    int v = 0;
    try {
      v = std::stoi(part);
    } catch (const std::exception&) {
      throw ParamError("color must be R,G,B");
    }
    if (v < 0 || v > 255) throw ParamError("color components must be in [0, 255]");
    rgb[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  return rgb;
}

struct OverlayFlags {
  std::string color = "255,0,0";
  int thickness = 1;
  bool mean_fill = false;

  OverlayStyle style() const {
    if (thickness != 1 && thickness != 2) throw ParamError("overlay thickness must be 1 or 2");
    return {parse_color(color), thickness, mean_fill};
  }
};

inline void add_overlay_flags(CLI::App& cmd, OverlayFlags& f) {
  cmd.add_option("--color", f.color, "Boundary color R,G,B")->capture_default_str();
  cmd.add_option("--thickness", f.thickness, "Boundary thickness (1 or 2)")->capture_default_str();
  cmd.add_flag("--mean-fill", f.mean_fill, "Fill superpixels with their mean color");
}

inline SegmentResult run_segment(const Image& image, const TaspParams& params) {
  validate_params(params, image_width(image), image_height(image));
  return segment(to_features(image), params);
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline nlohmann::json report_json(const EvalReport& r) {
  return {{"asa", r.asa},
          {"f", r.f_measure},
          {"precision", r.precision},
          {"recall", r.recall},
          {"count", r.superpixel_count}};
}

inline void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(out_path);
  if (!file) throw IoError("cannot write " + out_path);
  file << text;
}

// ---------------------------------------------------------------- segment

inline int cmd_segment(const std::string& input, const SegmentFlags& flags, std::string labels_out,
                       const std::string& overlay_out, const OverlayFlags& overlay, std::ostream& out) {
  TaspParams params = flags.params;
  params.mode = parse_mode(flags.mode);
  validate_params(params, std::max(params.K, 1), 1);
  const OverlayStyle style = overlay.style();
  const Image image = read_image(input);
  if (labels_out.empty()) labels_out = fs::path(input).stem().string() + "_labels.pgm";
  const auto start = std::chrono::steady_clock::now();
  const SegmentResult result = run_segment(image, params);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_labels(result.labels, labels_out);
  if (!overlay_out.empty()) write_image(overlay_out, render_overlay(image, result.labels, style));
  out << "superpixels: " << count_superpixels(result.labels) << '\n';
  out << "time: " << fixed(seconds, 3) << " s\n";
  out << "labels: " << labels_out << '\n';
  if (!overlay_out.empty()) out << "overlay: " << overlay_out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalRow {
  std::string name;
  std::optional<EvalReport> report;
  std::string error;
};

/// Label files (.pgm/.csv) of a directory keyed by stem; PGM wins over CSV.
inline std::map<std::string, fs::path> label_files(const fs::path& dir) {
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string ext = detail::lower_extension(entry.path());
    if (ext != ".pgm" && ext != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    auto it = files.find(stem);
    if (it == files.end() || ext == ".pgm") files[stem] = entry.path();
  }
  return files;
}

inline EvalReport mean_report(const std::vector<EvalRow>& rows) {
  EvalReport mean;
  double count = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!r.report) continue;
    mean.asa += r.report->asa;
    mean.f_measure += r.report->f_measure;
    mean.precision += r.report->precision;
    mean.recall += r.report->recall;
    count += static_cast<double>(r.report->superpixel_count);
    ++n;
  }
  if (n == 0) return mean;
  const double k = static_cast<double>(n);
  mean.asa /= k;
  mean.f_measure /= k;
  mean.precision /= k;
  mean.recall /= k;
  mean.superpixel_count = static_cast<std::size_t>(std::lround(count / k));
  return mean;
}

inline std::string format_eval(const std::vector<EvalRow>& rows, bool batch, ReportFormat format) {
  std::ostringstream s;
  const EvalReport mean = mean_report(rows);
  if (format == ReportFormat::Json) {
    nlohmann::json j;
    if (!batch) {
      j = report_json(*rows.front().report);
    } else {
      j["images"] = nlohmann::json::array();
      j["failed"] = nlohmann::json::array();
      for (const auto& r : rows) {
        if (r.report) {
          nlohmann::json row = report_json(*r.report);
          row["name"] = r.name;
          j["images"].push_back(row);
        } else {
          j["failed"].push_back({{"name", r.name}, {"error", r.error}});
        }
      }
      j["mean"] = report_json(mean);
    }
    s << j.dump(2) << '\n';
  } else if (format == ReportFormat::Csv) {
    s << "name,asa,f,precision,recall,count\n";
    auto line = [&](const std::string& name, const EvalReport& r) {
      s << name << ',' << fixed(r.asa, 6) << ',' << fixed(r.f_measure, 6) << ',' << fixed(r.precision, 6) << ','
        << fixed(r.recall, 6) << ',' << r.superpixel_count << '\n';
    };
    for (const auto& r : rows)
      if (r.report) line(r.name, *r.report);
    if (batch) line("mean", mean);
  } else {
    s << std::left << std::setw(24) << "image" << std::right << std::setw(9) << "ASA" << std::setw(9) << "F"
      << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(8) << "count" << '\n';
    auto line = [&](const std::string& name, const EvalReport& r) {
      s << std::left << std::setw(24) << name << std::right << std::setw(9) << fixed(r.asa) << std::setw(9)
        << fixed(r.f_measure) << std::setw(11) << fixed(r.precision) << std::setw(9) << fixed(r.recall)
        << std::setw(8) << r.superpixel_count << '\n';
    };
    for (const auto& r : rows) {
      if (r.report)
        line(r.name, *r.report);
      else
        s << std::left << std::setw(24) << r.name << "  failed: " << r.error << '\n';
    }
    if (batch) line("mean", mean);
  }
  return s.str();
}

inline int cmd_eval(const std::string& pred, const std::string& gt, int tolerance, const std::string& format_name,
                    const std::string& out_path, std::ostream& out, std::ostream& err) {
  const ReportFormat format = parse_format(format_name);
  if (tolerance < 0) throw ParamError("tolerance must be >= 0");
  const bool batch = fs::is_directory(pred);
  if (batch != fs::is_directory(gt)) throw ParamError("--pred and --gt must both be files or both be directories");
  std::vector<EvalRow> rows;
  if (!batch) {
    const LabelMap p = read_labels(pred);
    const LabelMap g = load_ground_truth(gt);
    if (!p.same_shape(g)) throw DimensionError("prediction and ground truth differ in size");
    rows.push_back({fs::path(pred).stem().string(), evaluate(p, g, tolerance), {}});
  } else {
    const auto preds = label_files(pred);
    const auto gts = label_files(gt);
    if (preds.empty()) throw IoError(pred + ": no label files (.pgm/.csv)");
    std::vector<std::pair<std::string, fs::path>> pairs(preds.begin(), preds.end());
    rows.resize(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
      const auto& [name, path] = pairs[i];
      EvalRow& row = rows[i];
      row.name = name;
      try {
        auto it = gts.find(name);
        if (it == gts.end()) throw IoError("no ground truth named " + name);
        const LabelMap p = read_labels(path);
        const LabelMap g = load_ground_truth(it->second);
        if (!p.same_shape(g)) throw DimensionError("prediction and ground truth differ in size");
        row.report = evaluate(p, g, tolerance);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    });
    for (const auto& r : rows)
      if (!r.report) err << "error: " << r.name << ": " << r.error << '\n';
  }
  emit(format_eval(rows, batch, format), out_path, out);
  for (const auto& r : rows)
    if (!r.report) return kFailure;
  return kOk;
}

// ---------------------------------------------------------------- generate

struct GenerateFlags {
  BatchOptions batch;
  std::string out_dir;
  std::string manifest;
  int max_textures = kMaxCompositeTextures;
  int texture_size = 256;
};

inline int finish_generate(const DatasetManifest& manifest, const std::string& out_dir, std::ostream& out) {
  const DatasetManifest written = write_dataset(out_dir, manifest);
  out << "wrote " << written.entries.size() << " images to " << out_dir << '\n';
  return kOk;
}

inline int cmd_generate_batch(GenerateFlags flags, const std::string& kind, std::ostream& out) {
  if (!flags.manifest.empty()) {
    const DatasetManifest manifest = read_manifest(flags.manifest);
    return finish_generate(manifest, flags.out_dir, out);
  }
  flags.batch.kind = kind;
  if (kind == "composite") {
    if (flags.batch.texture_dir.empty()) throw ParamError("composite generation needs --textures");
    if (flags.max_textures < 1 || flags.max_textures > kMaxCompositeTextures)
      throw ParamError("--max-textures must be in [1, 10]");
    flags.batch.max_regions = std::min(flags.batch.max_regions, flags.max_textures);
    flags.batch.min_regions = std::min(flags.batch.min_regions, flags.batch.max_regions);
  }
  return finish_generate(plan_dataset(flags.batch), flags.out_dir, out);
}

inline int cmd_generate_textures(const GenerateFlags& flags, std::ostream& out) {
  if (flags.batch.count < 1) throw ParamError("--count must be >= 1");
  if (flags.texture_size < 8) throw ParamError("--size must be >= 8");
  fs::create_directories(flags.out_dir);
  const auto textures = gen_procedural_textures(flags.batch.count, flags.texture_size, flags.texture_size, flags.batch.seed);
  for (std::size_t i = 0; i < textures.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "texture_%03zu.png", i);
    write_image(fs::path(flags.out_dir) / name, textures[i]);
  }
  out << "wrote " << textures.size() << " textures to " << flags.out_dir << '\n';
  return kOk;
}

// ---------------------------------------------------------------- overlay

inline int cmd_overlay(const std::string& image_path, const std::string& labels_path, const std::string& out_path,
                       const OverlayFlags& flags, std::ostream& out) {
  const OverlayStyle style = flags.style();
  const Image image = read_image(image_path);
  const LabelMap labels = read_labels(labels_path);
  write_image(out_path, render_overlay(image, labels, style));
  out << "overlay: " << out_path << '\n';
  return kOk;
}

// ---------------------------------------------------------------- ablate

inline constexpr Mode kAblationModes[] = {Mode::TaspNoTexture, Mode::TaspNoUnicity, Mode::Tasp};

inline const char* ablation_label(Mode mode) {
  switch (mode) {
    case Mode::TaspNoTexture: return "TASP w/o texture, unicity";
    case Mode::TaspNoUnicity: return "TASP w/o unicity";
    default: return "TASP";
  }
}

struct AblationTable {
  std::vector<std::string> datasets;
  /// scores[mode][dataset] = mean report
  std::vector<std::vector<EvalReport>> scores;
};

inline AblationTable run_ablation(const std::vector<std::string>& dirs, const TaspParams& base, int tolerance,
                                  std::ostream& log) {
  AblationTable table;
  std::vector<std::vector<DatasetItem>> items;
  for (const auto& dir : dirs) {
    auto list = list_dataset(dir);
    if (list.empty()) throw IoError(dir + ": dataset has no images");
    items.push_back(std::move(list));
    table.datasets.push_back(fs::path(dir).filename().string());
  }
  table.scores.assign(std::size(kAblationModes), std::vector<EvalReport>(dirs.size()));
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    std::vector<std::vector<EvalRow>> rows(std::size(kAblationModes));
    for (const auto& item : items[d]) {
      const Image image = read_image(item.image);
      const LabelMap gt = load_ground_truth(item.ground_truth);
      for (std::size_t k = 0; k < std::size(kAblationModes); ++k) {
        TaspParams params = base;
        params.mode = kAblationModes[k];
        const SegmentResult result = run_segment(image, params);
        if (!result.labels.same_shape(gt)) throw DimensionError(item.name + ": image and ground truth differ in size");
        rows[k].push_back({item.name, evaluate(result.labels, gt, tolerance), {}});
      }
      log << "  " << table.datasets[d] << '/' << item.name << " done\n";
    }
    for (std::size_t k = 0; k < std::size(kAblationModes); ++k) table.scores[k][d] = mean_report(rows[k]);
  }
  return table;
}

inline std::string format_ablation(const AblationTable& t, ReportFormat format) {
  std::ostringstream s;
  if (format == ReportFormat::Json) {
    nlohmann::json j = nlohmann::json::object();
    j["datasets"] = t.datasets;
    j["rows"] = nlohmann::json::array();
    for (std::size_t k = 0; k < std::size(kAblationModes); ++k) {
      nlohmann::json row = {{"method", mode_name(kAblationModes[k])}};
      for (std::size_t d = 0; d < t.datasets.size(); ++d)
        row[t.datasets[d]] = {{"asa", t.scores[k][d].asa}, {"f", t.scores[k][d].f_measure}};
      j["rows"].push_back(row);
    }
    s << j.dump(2) << '\n';
  } else if (format == ReportFormat::Csv) {
    s << "method";
    for (const auto& d : t.datasets) s << ',' << d << "_asa," << d << "_f";
    s << '\n';
    for (std::size_t k = 0; k < std::size(kAblationModes); ++k) {
      s << mode_name(kAblationModes[k]);
      for (std::size_t d = 0; d < t.datasets.size(); ++d)
        s << ',' << fixed(t.scores[k][d].asa, 6) << ',' << fixed(t.scores[k][d].f_measure, 6);
      s << '\n';
    }
  } else {
    s << std::left << std::setw(28) << "";
    for (const auto& d : t.datasets) s << std::left << std::setw(18) << d;
    s << '\n' << std::left << std::setw(28) << "Method";
    for (std::size_t d = 0; d < t.datasets.size(); ++d) s << std::left << std::setw(9) << "ASA" << std::setw(9) << "F";
    s << '\n';
    for (std::size_t k = 0; k < std::size(kAblationModes); ++k) {
      s << std::left << std::setw(28) << ablation_label(kAblationModes[k]);
      for (std::size_t d = 0; d < t.datasets.size(); ++d)
        s << std::left << std::setw(9) << fixed(t.scores[k][d].asa) << std::setw(9) << fixed(t.scores[k][d].f_measure);
      s << '\n';
    }
  }
  return s.str();
}

inline int cmd_ablate(const std::vector<std::string>& dirs, const SegmentFlags& flags, int tolerance,
                      const std::string& format_name, const std::string& out_path, std::ostream& out,
                      std::ostream& err) {
  const ReportFormat format = parse_format(format_name);
  if (tolerance < 0) throw ParamError("tolerance must be >= 0");
  validate_params(flags.params, std::max(flags.params.K, 1), 1);
  const AblationTable table = run_ablation(dirs, flags.params, tolerance, err);
  emit(format_ablation(table, format), out_path, out);
  return kOk;
}

// ---------------------------------------------------------------- entry

/// Parses arguments and runs one subcommand. Returns 0 on success, 1 on usage
/// errors and 2 on runtime failures.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Texture-aware superpixel segmentation", "tasp"};
  app.require_subcommand(1);

  SegmentFlags seg;
  OverlayFlags seg_overlay;
  std::string seg_input, labels_out, overlay_out;
  auto* segment_cmd = app.add_subcommand("segment", "Segment an image into superpixels");
  segment_cmd->add_option("input", seg_input, "Input image (PNG, PGM, PPM)")->required();
  add_param_flags(*segment_cmd, seg, true);
  segment_cmd->add_option("--labels-out", labels_out, "Label map output (.pgm or .csv)");
  segment_cmd->add_option("--overlay-out", overlay_out, "Boundary overlay output (.png or .ppm)");
  add_overlay_flags(*segment_cmd, seg_overlay);

  std::string pred, gt, eval_format = "text", eval_out;
  int eval_tolerance = 2;
  auto* eval_cmd = app.add_subcommand("eval", "Score label maps against ground truth (files or directories)");
  eval_cmd->add_option("--pred", pred, "Predicted label map or directory")->required();
  eval_cmd->add_option("--gt", gt, "Ground-truth label map or directory")->required();
  eval_cmd->add_option("--tolerance", eval_tolerance, "Boundary matching tolerance in pixels")->capture_default_str();
  eval_cmd->add_option("--format", eval_format, "text, csv or json")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Write the report to a file");

  GenerateFlags gen;
  auto* generate_cmd = app.add_subcommand("generate", "Generate synthetic texture datasets");
  generate_cmd->require_subcommand(1);
  auto add_batch = [&](CLI::App& cmd) {
    cmd.add_option("--out", gen.out_dir, "Output directory")->required();
    cmd.add_option("--count", gen.batch.count, "Number of images")->capture_default_str();
    cmd.add_option("--width", gen.batch.width, "Image width")->capture_default_str();
    cmd.add_option("--height", gen.batch.height, "Image height")->capture_default_str();
    cmd.add_option("--min-regions", gen.batch.min_regions, "Fewest regions per image")->capture_default_str();
    cmd.add_option("--max-regions", gen.batch.max_regions, "Most regions per image")->capture_default_str();
    cmd.add_option("--min-region-size", gen.batch.min_region_size, "Smallest region in pixels")->capture_default_str();
    cmd.add_option("--seed", gen.batch.seed, "Random seed")->capture_default_str();
    cmd.add_option("--from-manifest", gen.manifest, "Regenerate the dataset described by a manifest.json");
  };
  auto* stripes_cmd = generate_cmd->add_subcommand("stripes", "Binary stripe mosaics");
  add_batch(*stripes_cmd);
  auto* composite_cmd = generate_cmd->add_subcommand("composite", "Mosaics of normalized texture crops");
  add_batch(*composite_cmd);
  composite_cmd->add_option("--textures", gen.batch.texture_dir, "Directory of texture images");
  composite_cmd->add_option("--max-textures", gen.max_textures, "Most textures per image (<= 10)")->capture_default_str();
  composite_cmd->add_option("--mean", gen.batch.normalize.mean, "Normalized texture mean")->capture_default_str();
  composite_cmd->add_option("--stddev", gen.batch.normalize.stddev, "Normalized texture deviation")->capture_default_str();
  auto* textures_cmd = generate_cmd->add_subcommand("textures", "Procedural texture library");
  textures_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
  textures_cmd->add_option("--count", gen.batch.count, "Number of textures")->capture_default_str();
  textures_cmd->add_option("--size", gen.texture_size, "Texture side in pixels")->capture_default_str();
  textures_cmd->add_option("--seed", gen.batch.seed, "Random seed")->capture_default_str();

  std::string ov_image, ov_labels, ov_out;
  OverlayFlags ov_flags;
  auto* overlay_cmd = app.add_subcommand("overlay", "Draw superpixel boundaries over an image");
  overlay_cmd->add_option("--image", ov_image, "Input image")->required();
  overlay_cmd->add_option("--labels", ov_labels, "Label map (.pgm or .csv)")->required();
  overlay_cmd->add_option("--out", ov_out, "Output image (.png or .ppm)")->required();
  add_overlay_flags(*overlay_cmd, ov_flags);

  std::vector<std::string> ablate_dirs;
  SegmentFlags ablate_flags;
  std::string ablate_format = "text", ablate_out;
  int ablate_tolerance = 2;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare no-texture, no-unicity and full TASP on datasets");
  ablate_cmd->add_option("--dataset", ablate_dirs, "Dataset directory with images/ and gt/ (repeatable)")->required();
  add_param_flags(*ablate_cmd, ablate_flags, false);
  ablate_cmd->add_option("--tolerance", ablate_tolerance, "Boundary matching tolerance in pixels")->capture_default_str();
  ablate_cmd->add_option("--format", ablate_format, "text, csv or json")->capture_default_str();
  ablate_cmd->add_option("--out", ablate_out, "Write the report to a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (segment_cmd->parsed()) return cmd_segment(seg_input, seg, labels_out, overlay_out, seg_overlay, out);
    if (eval_cmd->parsed()) return cmd_eval(pred, gt, eval_tolerance, eval_format, eval_out, out, err);
    if (stripes_cmd->parsed()) return cmd_generate_batch(gen, "stripes", out);
    if (composite_cmd->parsed()) return cmd_generate_batch(gen, "composite", out);
    if (textures_cmd->parsed()) return cmd_generate_textures(gen, out);
    if (overlay_cmd->parsed()) return cmd_overlay(ov_image, ov_labels, ov_out, ov_flags, out);
    if (ablate_cmd->parsed())
      return cmd_ablate(ablate_dirs, ablate_flags, ablate_tolerance, ablate_format, ablate_out, out, err);
  } catch (const ParamError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace tasp::cli
