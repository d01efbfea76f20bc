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

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "json.hpp"
#include "orthopipe/count_eval.hpp"
#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

std::vector<WorldPoint> random_points(std::mt19937_64 & rng, std::size_t n, double extent)
{
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<WorldPoint> pts(n);
  for (auto & p : pts) {
    p = {u(rng), u(rng)};
  }
  return pts;
}

// Maximum bipartite matching size by exhaustive assignment (small instances only).
std::size_t max_matching(const std::vector<WorldPoint> & a, const std::vector<WorldPoint> & b, double r)
{
  std::size_t best = 0;
  std::vector<bool> used(b.size(), false);
  std::function<void(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t count) {
    if (i == a.size()) {
      best = std::max(best, count);
      return;
    }
    go(i + 1, count);
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (!used[j] && std::hypot(a[i].x - b[j].x, a[i].y - b[j].y) <= r) {
        used[j] = true;
        go(i + 1, count + 1);
        used[j] = false;
      }
    }
  };
  go(0, 0);
  return best;
}

TEST(Match, IdenticalSets)
{
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 200, 500.0);
  const auto r = evaluate(pts, pts, {});
  EXPECT_EQ(r.pred2gt.ratio, 1.0);
  EXPECT_EQ(r.gt2pred.ratio, 1.0);
  EXPECT_EQ(r.pred2gt.median_m, 0.0);
  EXPECT_EQ(r.gt2pred.median_m, 0.0);
}

TEST(Match, ThreeFourFiveBoundary)
{
  const std::vector<WorldPoint> src{{0, 0}};
  const std::vector<WorldPoint> dst{{3, 4}};
  const auto m = match_directional(src, dst, {5.0, false});
  EXPECT_EQ(m.ratio, 1.0);
  ASSERT_TRUE(m.median_m.has_value());
  EXPECT_EQ(*m.median_m, 5.0);
  const auto miss = match_directional(src, dst, {4.999, false});
  EXPECT_EQ(miss.ratio, 0.0);
  EXPECT_FALSE(miss.median_m.has_value());
}

TEST(Match, OutOfRadius)
{
  const std::vector<WorldPoint> src{{0, 0}};
  const std::vector<WorldPoint> dst{{6, 8}};
  const auto m = match_directional(src, dst, {});
  EXPECT_EQ(m.ratio, 0.0);
  EXPECT_FALSE(m.median_m.has_value());
}

TEST(Match, OneToOneVersusManyToOne)
{
  const std::vector<WorldPoint> preds{{0, 0}, {1, 0}, {2, 0}};
  const std::vector<WorldPoint> gts{{1, 0.5}};
  const auto strict = match_directional(preds, gts, {5.0, false});
  EXPECT_EQ(strict.matches.size(), 1u);
  EXPECT_EQ(strict.matches[0].src, 1u);
  EXPECT_NEAR(strict.ratio, 1.0 / 3.0, 1e-15);
  const auto loose = match_directional(preds, gts, {5.0, true});
  EXPECT_EQ(loose.ratio, 1.0);
}

TEST(Match, TiesBrokenBySourceThenTarget)
{
  const std::vector<WorldPoint> src{{0, 0}, {2, 0}};
  const std::vector<WorldPoint> dst{{1, 0}};
  const auto m = match_directional(src, dst, {});
  ASSERT_EQ(m.matches.size(), 1u);
  EXPECT_EQ(m.matches[0].src, 0u);
}

TEST(Match, OneToOneDisciplineAndRadius)
{
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_points(rng, 150, 100.0);
    const auto b = random_points(rng, 120, 100.0);
    const MatchConfig cfg{4.0, false};
    const auto m = match_directional(a, b, cfg);
    std::set<std::size_t> srcs;
    std::set<std::size_t> dsts;
    for (const auto & pm : m.matches) {
      ASSERT_TRUE(srcs.insert(pm.src).second);
      ASSERT_TRUE(dsts.insert(pm.dst).second);
      ASSERT_LE(pm.distance, cfg.radius_m);
    }
    ASSERT_GE(m.ratio, 0.0);
    ASSERT_LE(m.ratio, 1.0);
  }
}

TEST(Match, RatiosNonDecreasingInRadius)
{
  std::mt19937_64 rng(6);
  const auto a = random_points(rng, 300, 200.0);
  const auto b = random_points(rng, 250, 200.0);
  double prev_p = 0.0;
  double prev_g = 0.0;
  for (double d = 0.5; d <= 30.0; d += 0.5) {
    const auto r = evaluate(a, b, {d, false});
    EXPECT_GE(r.pred2gt.ratio, prev_p);
    EXPECT_GE(r.gt2pred.ratio, prev_g);
    prev_p = r.pred2gt.ratio;
    prev_g = r.gt2pred.ratio;
  }
}

TEST(Match, GreedyAgainstMaximumMatching)
{
  std::mt19937_64 rng(13);
  int discrepancies = 0;
  for (int t = 0; t < 300; ++t) {
    const auto a = random_points(rng, 1 + rng() % 8, 10.0);
    const auto b = random_points(rng, 1 + rng() % 8, 10.0);
    const auto greedy = match_directional(a, b, {3.0, false}).matches.size();
    const auto best = max_matching(a, b, 3.0);
    ASSERT_LE(greedy, best);
    ASSERT_GE(2 * greedy, best);
    discrepancies += greedy != best;
  }
  std::cout << "greedy below maximum matching in " << discrepancies << " of 300 instances\n";
  RecordProperty("greedy_discrepancies", discrepancies);
}

TEST(Median, EvenOddEmpty)
{
  EXPECT_FALSE(median({}).has_value());
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Grid, MatchesBruteForce)
{
  std::mt19937_64 rng(17);
  const auto pts = random_points(rng, 1000, 100.0);
  std::uniform_real_distribution<double> u(-10.0, 110.0);
  std::uniform_real_distribution<double> rad(0.0, 15.0);
  for (double cell : {0.5, 3.0, 20.0}) {
    const PointGrid grid(pts, cell);
    for (int q = 0; q < 100; ++q) {
      const WorldPoint c{u(rng), u(rng)};
      const double r = rad(rng);
      std::vector<std::size_t> brute;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double dx = pts[i].x - c.x;
        const double dy = pts[i].y - c.y;
        if (dx * dx + dy * dy <= r * r) {
          brute.push_back(i);
        }
      }
      ASSERT_EQ(grid.within(c, r), brute);
    }
  }
}

TEST(Grid, EdgeCases)
{
  const std::vector<WorldPoint> pts{{1.5, -2.5}, {600000.25, 9950000.5}};
  const PointGrid grid(pts, 5.0);
  EXPECT_EQ(grid.within({1.5, -2.5}, 0.0), (std::vector<std::size_t>{0}));
  EXPECT_EQ(grid.within({600000.25, 9950000.5}, 0.0), (std::vector<std::size_t>{1}));
  const PointGrid empty(std::vector<WorldPoint>{}, 5.0);
  EXPECT_TRUE(empty.within({0, 0}, 100.0).empty());
}

TEST(Curve, NearestRankP90)
{
  DirectionalMatch m;
  for (int i = 1; i <= 10; ++i) {
    m.matches.push_back({static_cast<std::size_t>(i), 0, static_cast<double>(11 - i)});
  }
  const auto c = cumulative_shifts(m);
  ASSERT_EQ(c.distances.size(), 10u);
  EXPECT_TRUE(std::is_sorted(c.distances.begin(), c.distances.end()));
  EXPECT_EQ(c.fractions.back(), 1.0);
  EXPECT_EQ(c.p90_m, 9.0);
  EXPECT_FALSE(cumulative_shifts(DirectionalMatch{}).p90_m.has_value());
}

TEST(Evaluate, EmptyGroundTruth)
{
  try {
    evaluate(std::vector<WorldPoint>{{0, 0}}, {}, {});
    FAIL();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyGroundTruth);
  }
}

TEST(Evaluate, EmptyPredictions)
{
  const auto r = evaluate({}, std::vector<WorldPoint>{{0, 0}}, {});
  EXPECT_EQ(r.pred2gt.ratio, 0.0);
  EXPECT_EQ(r.gt2pred.ratio, 0.0);
}

TEST(Evaluate, InvalidRadius)
{
  const std::vector<WorldPoint> p{{0, 0}};
  EXPECT_THROW(evaluate(p, p, {0.0, false}), Error);
  EXPECT_THROW(evaluate(p, p, {-1.0, false}), Error);
}

TEST(Report, CountingRowColumns)
{
  const std::vector<WorldPoint> gts{{0, 0}, {10, 0}, {20, 0}, {30, 0}};
  const std::vector<WorldPoint> preds{{0.5, 0}, {10, 1.0}, {50, 50}};
  const auto r = evaluate(preds, gts, {});
  const auto row = counting_row(r, "FCAT", 12.5);
  EXPECT_EQ(row.counts, 4u);
  EXPECT_NEAR(row.pred2gt_ratio, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(row.gt2pred_ratio, 0.5);
  EXPECT_EQ(row.pred2gt_median_m, 0.75);
  EXPECT_EQ(std::string(kCountingCsvHeader),
    "Site,Area (ha),Counts,Pred2GT Ratio,Pred2GT Median (m),GT2Pred Ratio,GT2Pred Median (m)");
  EXPECT_EQ(counting_row_csv(row), "FCAT,12.50,4,0.6667,0.75,0.5000,0.75");
  EXPECT_EQ(counting_row_from_json(counting_row_to_json(row)), row);

  const auto none = counting_row(evaluate({}, gts, {}), "a,b", std::nullopt);
  EXPECT_EQ(counting_row_csv(none), "\"a,b\",,4,0.0000,,0.0000,");
  EXPECT_EQ(counting_row_from_json(counting_row_to_json(none)), none);
}

TEST(Report, JsonAndCurveOutputs)
{
  const std::vector<WorldPoint> gts{{0, 0}, {10, 0}};
  const std::vector<WorldPoint> preds{{0, 3}, {10, 1}};
  const auto r = evaluate(preds, gts, {});
  const auto alt = evaluate(preds, gts, {5.0, true});
  const auto j = nlohmann::json::parse(report_to_json(r, counting_row(r, "s", 1.0), &alt));
  EXPECT_EQ(j["table"]["counts"], 2);
  EXPECT_EQ(j["matching"], "one-to-one");
  EXPECT_EQ(j["alternate"]["matching"], "many-to-one");
  EXPECT_EQ(j["pred2gt"]["matches"].size(), 2u);
  EXPECT_EQ(j["gt2pred"]["p90_m"], 3.0);

  const auto csv = cumulative_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "direction,distance_m,fraction");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const auto svg = cumulative_svg(r);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(svg.find("Pred2GT"), std::string::npos);
  EXPECT_NE(svg.find("GT2Pred"), std::string::npos);
}

}  // namespace
}  // namespace orthopipe
