#include <gtest/gtest.h>

#include <fstream>

#include "temp_dir.hpp"
#include "tasp/io.hpp"
#include "tasp/random.hpp"

using namespace tasp;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RgbImage random_rgb(int W, int H, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(W, H);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace

TEST(ReadImage, KnownPpmBytes) {
  TempDir dir;
  std::string bytes = "P6\n# comment\n2 2\n255\n";
  const unsigned char raster[12] = {1, 2, 3, 4, 5, 6, 250, 251, 252, 0, 128, 255};
  bytes.append(reinterpret_cast<const char*>(raster), 12);
  write_bytes(dir / "a.ppm", bytes);
  const Image img = read_image(dir / "a.ppm");
  const auto& rgb = std::get<RgbImage>(img);
  EXPECT_EQ(rgb.width, 2);
  EXPECT_EQ(rgb.height, 2);
  EXPECT_EQ(rgb.data, std::vector<std::uint8_t>(raster, raster + 12));
}

TEST(ReadImage, SixteenBitPgmIsRescaled) {
  TempDir dir;
  std::string bytes = "P5\n2 1\n65535\n";
  bytes += std::string("\xFF\xFF\x00\x00", 4);
  write_bytes(dir / "g.pgm", bytes);
  const auto g = std::get<GrayImage>(read_image(dir / "g.pgm"));
  EXPECT_EQ(g.data, (std::vector<std::uint8_t>{255, 0}));
}

TEST(ReadImage, RoundTripsAllFormats) {
  TempDir dir;
  const RgbImage rgb = random_rgb(7, 5, 1);
  GrayImage gray(6, 4);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<std::uint8_t>(i * 9);
  write_image(dir / "c.png", rgb);
  write_image(dir / "c.ppm", rgb);
  write_image(dir / "g.png", gray);
  write_image(dir / "g.pgm", gray);
  EXPECT_EQ(std::get<RgbImage>(read_image(dir / "c.png")), rgb);
  EXPECT_EQ(std::get<RgbImage>(read_image(dir / "c.ppm")), rgb);
  EXPECT_EQ(std::get<GrayImage>(read_image(dir / "g.png")), gray);
  EXPECT_EQ(std::get<GrayImage>(read_image(dir / "g.pgm")), gray);
}

TEST(ReadImage, Errors) {
  TempDir dir;
  EXPECT_THROW(read_image(dir / "missing.png"), IoError);
  EXPECT_THROW(read_image(dir / "x.bmp"), IoError);
  write_bytes(dir / "t.ppm", "P6\n4 4\n255\n" + std::string(10, 'x'));
  EXPECT_THROW(read_image(dir / "t.ppm"), IoError);
  write_bytes(dir / "bad.pgm", "P2\n1 1\n255\n0");
  EXPECT_THROW(read_image(dir / "bad.pgm"), IoError);
  write_image(dir / "ok.png", random_rgb(8, 8, 2));
  const std::string png = read_bytes(dir / "ok.png");
  write_bytes(dir / "cut.png", png.substr(0, png.size() / 2));
  EXPECT_THROW(read_image(dir / "cut.png"), IoError);
  EXPECT_THROW(write_image(dir / "c.pgm", random_rgb(2, 2, 3)), IoError);
}

TEST(Labels, PgmHeaderAndMaxValue) {
  const std::string pgm = encode_labels(LabelMap(3, 1, {0, 1, 2}), LabelFormat::Pgm16);
  EXPECT_EQ(pgm.substr(0, 13), "P5\n3 1\n65535\n");
  EXPECT_EQ(pgm.size(), 13u + 6u);
  EXPECT_EQ(static_cast<unsigned char>(pgm[13 + 5]), 2);
}

TEST(Labels, CsvShape) {
  const std::string csv = encode_labels(LabelMap(4, 3, 1), LabelFormat::Csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), ','), 3 * 3);
  EXPECT_EQ(csv, "1,1,1,1\n1,1,1,1\n1,1,1,1\n");
}

TEST(Labels, Overflow) {
  std::vector<int> v(70000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
  const LabelMap l(700, 100, v);
  EXPECT_THROW(encode_labels(l, LabelFormat::Pgm16), IoError);
  EXPECT_NO_THROW(encode_labels(l, LabelFormat::Csv));
}

TEST(Labels, RoundTrip) {
  TempDir dir;
  Rng rng(4);
  std::vector<int> v(9 * 7);
  for (int& l : v) l = static_cast<int>(rng.below(65536));
  const LabelMap l(9, 7, v);
  write_labels(l, dir / "l.pgm");
  write_labels(l, dir / "l.csv");
  EXPECT_EQ(read_labels(dir / "l.pgm"), l);
  EXPECT_EQ(read_labels(dir / "l.csv"), l);
  EXPECT_THROW(write_labels(l, dir / "l.txt"), IoError);
}

TEST(Labels, CsvParsing) {
  const LabelMap l = parse_label_csv("0,0,1\n0,1,1\n");
  EXPECT_EQ(l.width(), 3);
  EXPECT_EQ(l.height(), 2);
  EXPECT_EQ(count_superpixels(l), 2u);
  EXPECT_EQ(parse_label_csv("1, 2\r\n3,4\n\n"), LabelMap(2, 2, {1, 2, 3, 4}));
  EXPECT_THROW(parse_label_csv("0,1\n0\n"), IoError);
  EXPECT_THROW(parse_label_csv("0,x\n"), IoError);
  EXPECT_THROW(parse_label_csv("0,-1\n"), IoError);
  EXPECT_THROW(parse_label_csv(""), IoError);
}

TEST(Labels, PpmIsNotALabelMap) {
  TempDir dir;
  write_image(dir / "c.ppm", random_rgb(2, 2, 5));
  std::filesystem::rename(dir / "c.ppm", dir / "c.pgm");
  EXPECT_THROW(read_labels(dir / "c.pgm"), IoError);
}

TEST(Overlay, ConstantLabelingIsIdentity) {
  const RgbImage img = random_rgb(6, 5, 6);
  EXPECT_EQ(render_overlay(img, LabelMap(6, 5)), img);
}

TEST(Overlay, SeamPainted) {
  const RgbImage img(6, 4);
  LabelMap l(6, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 3; x < 6; ++x) l(x, y) = 1;
  const RgbImage out = render_overlay(img, l, {{10, 20, 30}, 1, false});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      const bool seam = x == 2;
      EXPECT_EQ(out.at(x, y)[0], seam ? 10 : 0);
      EXPECT_EQ(out.at(x, y)[2], seam ? 30 : 0);
    }
  const RgbImage thick = render_overlay(img, l, {{10, 20, 30}, 2, false});
  EXPECT_EQ(thick.at(3, 0)[0], 10);
  EXPECT_EQ(thick.at(4, 0)[0], 0);
}

TEST(Overlay, MeanFillOnConstantImage) {
  GrayImage g(5, 5, 77);
  const RgbImage out = render_overlay(g, LabelMap(5, 5), {{255, 0, 0}, 1, true});
  for (auto v : out.data) EXPECT_EQ(v, 77);
}

TEST(Overlay, Errors) {
  EXPECT_THROW(render_overlay(GrayImage(3, 3), LabelMap(3, 2)), DimensionError);
  EXPECT_THROW(render_overlay(GrayImage(3, 3), LabelMap(3, 3), {{0, 0, 0}, 3, false}), std::invalid_argument);
}

TEST(Features, ImageVariants) {
  GrayImage g(2, 1);
  g.data = {0, 255};
  EXPECT_NEAR(to_features(g).at(1, 0, 0), 100.0, 1e-12);
  EXPECT_EQ(image_width(Image{g}), 2);
  EXPECT_EQ(to_rgb(g).data, (std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255}));
}
