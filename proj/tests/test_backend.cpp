// Copyright (c) 2026 The orthopipe Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "orthopipe/backend.hpp"
#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

Mask from_bits(int w, int h, std::initializer_list<int> bits)
{
  Mask m(w, h);
  std::size_t i = 0;
  for (int b : bits) {
    m.bits[i++] = static_cast<std::uint8_t>(b);
  }
  return m;
}

// Independent rasterizer: pixel (x, y) is inside when its center lies in the closed ellipse.
std::int64_t brute_ellipse_area(int w, int h, const Box & b)
{
  std::int64_t n = 0;
  const double cx = 0.5 * (b.x1 + b.x2);
  const double cy = 0.5 * (b.y1 + b.y2);
  const double rx = 0.5 * (b.x2 - b.x1);
  const double ry = 0.5 * (b.y2 - b.y1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      n += dx * dx + dy * dy <= 1.0 ? 1 : 0;
    }
  }
  return n;
}

TEST(Rle, HandExamples)
{
  EXPECT_EQ(rle_encode(from_bits(2, 2, {0, 0, 0, 0})).counts, (std::vector<std::int64_t>{4}));
  EXPECT_EQ(rle_encode(from_bits(2, 2, {1, 1, 1, 1})).counts, (std::vector<std::int64_t>{0, 4}));
  EXPECT_EQ(rle_encode(from_bits(2, 2, {0, 1, 1, 0})).counts, (std::vector<std::int64_t>{1, 2, 1}));
}

TEST(Rle, RandomRoundTrip)
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const int w = 1 + static_cast<int>(rng() % 40);
    const int h = 1 + static_cast<int>(rng() % 40);
    const double density = static_cast<double>(rng() % 101) / 100.0;
    Mask m(w, h);
    std::bernoulli_distribution bit(density);
    for (auto & b : m.bits) {
      b = bit(rng) ? 1 : 0;
    }
    const auto rle = rle_encode(m);
    std::int64_t sum = 0;
    for (auto c : rle.counts) {
      sum += c;
    }
    ASSERT_EQ(sum, static_cast<std::int64_t>(w) * h);
    ASSERT_EQ(rle_decode(rle), m);
  }
}

TEST(Rle, MalformedCounts)
{
  const auto bad = [](MaskRLE r) {
    try {
      rle_decode(r);
    } catch (const Error & e) {
      return e.kind() == ErrorKind::MalformedRLE;
    }
    return false;
  };
  EXPECT_TRUE(bad({2, 2, {3}}));
  EXPECT_TRUE(bad({2, 2, {5}}));
  EXPECT_TRUE(bad({2, 2, {2, -1, 3}}));
  EXPECT_TRUE(bad({2, 2, {2, 0, 2}}));
  EXPECT_TRUE(bad({0, 2, {}}));
  EXPECT_TRUE(bad({2, 2, {}}));
  EXPECT_FALSE(bad({2, 2, {0, 4}}));
}

TEST(Ellipse, FourByFourBoxMatchesBruteForce)
{
  const Box box{0, 0, 4, 4};
  const Mask m = ellipse_mask(4, 4, box);
  EXPECT_EQ(m.foreground(), brute_ellipse_area(4, 4, box));
  EXPECT_EQ(m.foreground(), 12);
}

TEST(Ellipse, WholeTileBoxIsInscribedEllipse)
{
  for (auto [w, h] : {std::pair{64, 64}, std::pair{80, 50}, std::pair{7, 13}}) {
    const Box box{0, 0, static_cast<double>(w), static_cast<double>(h)};
    EXPECT_EQ(ellipse_mask(w, h, box).foreground(), brute_ellipse_area(w, h, box));
  }
}

TEST(Ellipse, RandomBoxesMatchBruteForce)
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10.0, 70.0);
  for (int i = 0; i < 200; ++i) {
    double a = u(rng);
    double b = u(rng);
    double c = u(rng);
    double d = u(rng);
    const Box box{std::min(a, b), std::min(c, d), std::max(a, b) + 0.5, std::max(c, d) + 0.5};
    ASSERT_EQ(ellipse_mask(60, 60, box).foreground(), brute_ellipse_area(60, 60, box));
  }
}

TEST(SegmentOracle, OneMaskPerBoxWithTileDims)
{
  EXPECT_TRUE(segment_oracle(10, 10, {}).empty());
  const std::vector<Box> boxes{{1, 1, 5, 5}, {3, 2, 9, 8}};
  const auto masks = segment_oracle(10, 12, boxes);
  ASSERT_EQ(masks.size(), 2u);
  for (const auto & m : masks) {
    EXPECT_EQ(m.w, 10);
    EXPECT_EQ(m.h, 12);
  }
  EXPECT_EQ(rle_decode(masks[1]), ellipse_mask(10, 12, boxes[1]));
}

TEST(Oracle, NoiselessReturnsTruthBoxes)
{
  const std::vector<TruthObject> truth{{1, {10, 10, 50, 50}}, {2, {100, 120, 140, 160}}};
  const auto pred = detect_oracle({0, 0, 200, 200, 0}, truth, OracleNoise::noiseless());
  ASSERT_EQ(pred.detections.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(pred.detections[i].box, truth[i].box);
    EXPECT_EQ(pred.detections[i].score, 1.0);
  }
}

TEST(Oracle, EmptyTileEmptyPrediction)
{
  EXPECT_TRUE(detect_oracle({0, 0, 800, 800, 3}, {}, OracleNoise::noiseless()).detections.empty());
}

TEST(Oracle, ClippedObjectsNeedMostlyVisible)
{
  const std::vector<TruthObject> truth{{1, {-5, 10, 35, 50}}, {2, {-30, 60, 10, 100}}};
  const auto pred = detect_oracle({0, 0, 200, 200, 0}, truth, OracleNoise::noiseless());
  ASSERT_EQ(pred.detections.size(), 1u);
  EXPECT_EQ(pred.detections[0].box, (Box{0, 10, 35, 50}));
  EXPECT_NEAR(pred.detections[0].score, 35.0 / 40.0, 1e-12);
}

TEST(Oracle, DeterministicPerSeedAndTile)
{
  OracleNoise n;
  n.drop_rate = 0.3;
  n.spurious_rate = 0.9;
  n.center_jitter_sigma = 3.0;
  n.seed = 42;
  std::vector<TruthObject> truth;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const double x = 20.0 + static_cast<double>(i % 10) * 70.0;
    const double y = 20.0 + static_cast<double>(i / 10) * 70.0;
    truth.push_back({i, {x, y, x + 40, y + 40}});
  }
  const TileWindow tile{0, 0, 800, 800, 7};
  const auto a = detect_oracle(tile, truth, n);
  const auto b = detect_oracle(tile, truth, n);
  ASSERT_EQ(a.detections.size(), b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_EQ(a.detections[i].box, b.detections[i].box);
    EXPECT_EQ(a.detections[i].score, b.detections[i].score);
  }
  n.seed = 43;
  const auto c = detect_oracle(tile, truth, n);
  bool differs = c.detections.size() != a.detections.size();
  for (std::size_t i = 0; !differs && i < a.detections.size(); ++i) {
    differs = !(a.detections[i].box == c.detections[i].box);
  }
  EXPECT_TRUE(differs);
}

TEST(Oracle, DropRateIsBinomial)
{
  OracleNoise n = OracleNoise::noiseless(17);
  n.drop_rate = 0.1;
  int dropped = 0;
  for (std::uint64_t id = 0; id < 10000; ++id) {
    dropped += oracle_drops(n, id) ? 1 : 0;
  }
  // 99.9% interval of Binomial(10000, 0.1): 1000 +- 3.29 * 30
  EXPECT_NEAR(dropped, 1000, 99);
}

TEST(Oracle, SpuriousCountsArePoisson)
{
  OracleNoise n = OracleNoise::noiseless(3);
  n.spurious_rate = 0.2;
  double sum = 0.0;
  for (int t = 0; t < 20000; ++t) {
    sum += oracle_spurious_count(n, t);
  }
  EXPECT_NEAR(sum / 20000.0, 0.2, 0.02);
  const auto pred = detect_oracle({0, 0, 800, 800, 11}, {}, n);
  EXPECT_EQ(static_cast<int>(pred.detections.size()), oracle_spurious_count(n, 11));
  for (const auto & d : pred.detections) {
    EXPECT_TRUE(d.box.valid());
    EXPECT_GE(d.box.x1, 0.0);
    EXPECT_LE(d.box.x2, 800.0);
    EXPECT_LT(d.score, 0.31);
  }
}

TEST(Oracle, ScoresTrackIouPlusBias)
{
  OracleNoise n = OracleNoise::noiseless(8);
  n.center_jitter_sigma = 4.0;
  n.score_law.bias = 0.2;
  std::vector<TruthObject> truth;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const double x = 50.0 + static_cast<double>(i % 8) * 90.0;
    const double y = 50.0 + static_cast<double>(i / 8) * 90.0;
    truth.push_back({i, {x, y, x + 40, y + 40}});
  }
  const auto pred = detect_oracle({0, 0, 800, 800, 0}, truth, n);
  ASSERT_EQ(pred.detections.size(), truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Box & p = pred.detections[i].box;
    const Box & t = truth[i].box;
    const double inter = intersection_area(p, t);
    const double iou = inter / (p.area() + t.area() - inter);
    EXPECT_NEAR(pred.detections[i].score, std::min(1.0, iou + 0.2), 1e-12);
  }
}

TEST(Oracle, RestrictToTileTranslates)
{
  const std::vector<TruthObject> truth{{1, {410, 410, 450, 450}}, {2, {10, 10, 50, 50}}};
  const auto local = restrict_to_tile(truth, {400, 400, 800, 800, 0});
  ASSERT_EQ(local.size(), 1u);
  EXPECT_EQ(local[0].id, 1u);
  EXPECT_EQ(local[0].box, (Box{10, 10, 50, 50}));
}

TEST(Oracle, InvalidNoiseRejected)
{
  OracleNoise n;
  n.drop_rate = 1.5;
  EXPECT_THROW(n.validate(), Error);
  n = OracleNoise{};
  n.center_jitter_sigma = -1.0;
  EXPECT_THROW(n.validate(), Error);
}

TEST(Oracle, BackendInterfaceMatchesFreeFunctions)
{
  const std::vector<TruthObject> truth{{5, {410, 410, 450, 450}}};
  OracleBackend backend(truth, OracleNoise::noiseless());
  const TileWindow tile{400, 400, 800, 800, 4};
  const auto pred = backend.detect(tile, Image{});
  ASSERT_EQ(pred.detections.size(), 1u);
  EXPECT_EQ(pred.detections[0].box, (Box{10, 10, 50, 50}));
  const std::vector<Box> boxes{pred.detections[0].box};
  const auto masks = backend.segment(tile, Image{}, boxes);
  ASSERT_EQ(masks.size(), 1u);
  EXPECT_EQ(rle_decode(masks[0]), ellipse_mask(800, 800, boxes[0]));
}

}  // namespace
}  // namespace orthopipe
