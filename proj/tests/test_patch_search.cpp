#include <gtest/gtest.h>

#include <cstdlib>

#include "oracles.hpp"
#include "tasp/patch_search.hpp"

using namespace tasp;

namespace {

FeatureImage ramp(int W, int H) {
  FeatureImage f(W, H, 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) f.at(x, y, 0) = y * W + x;
  return f;
}

/// Left half label 0, right half label 1.
LabelMap halves(int W, int H) {
  LabelMap l(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = W / 2; x < W; ++x) l(x, y) = 1;
  return l;
}

}  // namespace

TEST(Patch, ConstantImage) {
  const Patch p = extract_patch(FeatureImage(6, 6, 3, 2.5), {3, 3}, 5);
  EXPECT_EQ(p.values.size(), 75u);
  for (double v : p.values) EXPECT_EQ(v, 2.5);
}

TEST(Patch, RampGather) {
  const Patch p = extract_patch(ramp(3, 3), {1, 1}, 3);
  EXPECT_EQ(p.values, (std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(Patch, CornerUsesEdgeReplication) {
  const FeatureImage f = ramp(7, 6);
  const Patch p = extract_patch(f, {0, 0}, 5);
  FeatureImage padded(11, 10, 1);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 11; ++x) padded.at(x, y, 0) = f.at(std::clamp(x - 2, 0, 6), std::clamp(y - 2, 0, 5), 0);
  const Patch q = extract_patch(padded, {2, 2}, 5);
  EXPECT_EQ(p.values, q.values);
}

TEST(Patch, RejectsBadInput) {
  EXPECT_THROW(extract_patch(ramp(3, 3), {3, 0}, 3), std::out_of_range);
  EXPECT_THROW(extract_patch(ramp(3, 3), {1, 1}, 4), ParamError);
}

TEST(PatchDistance, ClosedForms) {
  Patch a{{0, 0}, 5, 3, std::vector<double>(75, 1.0)};
  Patch b = a;
  EXPECT_EQ(patch_feature_distance(a, b), 0.0);
  for (double& v : b.values) v += 1.0;
  EXPECT_NEAR(patch_feature_distance(a, b), 0.11547, 1e-5);
  EXPECT_NEAR(patch_feature_distance(a, b), 1.0 / std::sqrt(75.0), 1e-15);
  Patch c = a;
  c.values[17] += 4.0;
  EXPECT_NEAR(patch_feature_distance(a, c), 4.0 / 75.0, 1e-15);
  Patch d{{0, 0}, 3, 3, std::vector<double>(27, 0.0)};
  EXPECT_THROW(patch_feature_distance(a, d), DimensionError);
}

TEST(PatchBank, SsdMatchesPatchDistance) {
  Rng rng(5);
  FeatureImage f(12, 10, 3);
  for (double& v : f.data()) v = rng.uniform() * 100.0;
  const PatchBank bank(f, 5);
  EXPECT_EQ(bank.entries(), 75);
  for (int k = 0; k < 50; ++k) {
    const Pixel a{static_cast<int>(rng.below(12)), static_cast<int>(rng.below(10))};
    const Pixel b{static_cast<int>(rng.below(12)), static_cast<int>(rng.below(10))};
    const double ref = patch_feature_distance(extract_patch(f, a, 5), extract_patch(f, b, 5));
    const float ssd = bank.ssd(f.index(a.x, a.y), f.index(b.x, b.y));
    EXPECT_NEAR(bank.distance_from_ssd(ssd), ref, 1e-5 * (1.0 + ref));
    EXPECT_EQ(bank.ssd_bounded(f.index(a.x, a.y), f.index(b.x, b.y), INFINITY), ssd);
  }
}

TEST(PatchBank, ZeroChannelsKeepPatchSize) {
  FeatureImage f(6, 6, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) f.at(x, y, 0) = x * 3.0;
  const PatchBank bank(f, 3);
  EXPECT_EQ(bank.entries(), 27);
  const double ref = patch_feature_distance(extract_patch(f, {1, 1}, 3), extract_patch(f, {4, 2}, 3));
  EXPECT_NEAR(bank.distance_from_ssd(bank.ssd(f.index(1, 1), f.index(4, 2))), ref, 1e-6);
}

TEST(RegionIndex, RejectsOversizedSide) {
  EXPECT_THROW(RegionIndex(LabelMap(kMaxPackedSide + 1, 1)), DimensionError);
}

TEST(FindMatches, ConstantRegionGivesZeroDistance) {
  const FeatureImage f(32, 32, 3, 42.0);
  TaspParams p;
  p.K = 4;
  p.N = 4;
  const auto cs = find_matches(f, halves(32, 32), {5, 5}, 1, p);
  ASSERT_EQ(cs.matches.size(), 4u);
  for (const Match& m : cs.matches) EXPECT_EQ(m.distance, 0.0);
}

TEST(FindMatches, ValidityConstraints) {
  const FeatureImage f = oracle::two_textures(40, 40, 1);
  const LabelMap labels = halves(40, 40);
  TaspParams p;
  p.K = 16;
  for (int q = 0; q < 20; ++q) {
    const Pixel query{(q * 7) % 40, (q * 11) % 40};
    for (int target : {0, 1}) {
      const auto cs = find_matches(f, labels, query, target, p);
      EXPECT_EQ(cs.matches.size(), static_cast<std::size_t>(p.N));
      std::set<std::pair<int, int>> distinct;
      for (const Match& m : cs.matches) {
        EXPECT_GT(chebyshev(m.position, query), p.delta);
        EXPECT_EQ(labels(m.position.x, m.position.y), target);
        distinct.insert({m.position.x, m.position.y});
      }
      EXPECT_EQ(distinct.size(), cs.matches.size());
    }
  }
}

TEST(FindMatches, SmallRegionReturnsAllValidCandidates) {
  const FeatureImage f = oracle::two_textures(16, 16, 2);
  LabelMap labels(16, 16);
  labels(10, 10) = 1;
  labels(11, 10) = 1;
  TaspParams p;
  p.K = 4;
  const auto near = find_matches(f, labels, {9, 10}, 1, p);
  EXPECT_TRUE(near.matches.empty());
  const auto far = find_matches(f, labels, {2, 2}, 1, p);
  EXPECT_EQ(far.matches.size(), 2u);
}

TEST(FindMatches, Deterministic) {
  const FeatureImage f = oracle::two_textures(32, 32, 3);
  const LabelMap labels = halves(32, 32);
  TaspParams p;
  p.K = 4;
  const auto a = find_matches(f, labels, {20, 9}, 1, p);
  const auto b = find_matches(f, labels, {20, 9}, 1, p);
  ASSERT_EQ(a.matches.size(), b.matches.size());
  for (std::size_t i = 0; i < a.matches.size(); ++i) {
    EXPECT_EQ(a.matches[i].position, b.matches[i].position);
    EXPECT_EQ(a.matches[i].distance, b.matches[i].distance);
  }
}

/// 100-pixel superpixel in a 32x32 two-texture image, N=4, averaged over 10 seeds.
TEST(FindMatches, CloseToExhaustiveBestN) {
  double approx = 0.0, exact = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FeatureImage f = oracle::two_textures(32, 32, 100 + seed);
    LabelMap labels(32, 32);
    for (int y = 11; y < 21; ++y)
      for (int x = 11; x < 21; ++x) labels(x, y) = 1;
    TaspParams p;
    p.K = 9;
    p.N = 4;
    p.seed = seed;
    const Pixel query{static_cast<int>(3 + seed), static_cast<int>(25 - seed)};
    const auto cs = find_matches(f, labels, query, 1, p);
    const auto ref = oracle::best_n(f, labels, query.x, query.y, 1, 4, 5, 3);
    ASSERT_EQ(cs.matches.size(), ref.size());
    double a = 0.0, e = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      a += cs.matches[i].distance / 4.0;
      e += ref[i] / 4.0;
    }
    EXPECT_GE(a, e * (1.0 - 1e-6));
    approx += a / 10.0;
    exact += e / 10.0;
  }
  EXPECT_LE(approx, exact * 1.25);
}

TEST(FindMatches, IndependentOfThreadCount) {
  const FeatureImage f = oracle::two_textures(32, 32, 4);
  const LabelMap labels = halves(32, 32);
  TaspParams p;
  p.K = 4;
  setenv("TASP_THREADS", "1", 1);
  const auto a = find_matches(f, labels, {3, 3}, 1, p);
  setenv("TASP_THREADS", "4", 1);
  const auto b = find_matches(f, labels, {3, 3}, 1, p);
  unsetenv("TASP_THREADS");
  ASSERT_EQ(a.matches.size(), b.matches.size());
  for (std::size_t i = 0; i < a.matches.size(); ++i) EXPECT_EQ(a.matches[i].position, b.matches[i].position);
}
