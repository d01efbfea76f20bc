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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "orthopipe/geo_raster.hpp"

namespace orthopipe
{

struct MatchConfig
{
  /// Match radius in projected meters; inclusive.
  double radius_m = 5.0;
  /// Proximity counting: every source point may claim its nearest target
  /// within the radius even if another source already claimed it.
  bool allow_many_to_one = false;

  void validate() const;
};

struct PointMatch
{
  std::size_t src = 0;
  std::size_t dst = 0;
  double distance = 0.0;
};

struct DirectionalMatch
{
  std::vector<PointMatch> matches;
  std::size_t source_count = 0;
  /// matches / source_count; 0 for an empty source set.
  double ratio = 0.0;
  /// Median over matched distances; empty when nothing matched.
  std::optional<double> median_m;
};

/// Uniform-grid index over 2-D points for radius queries.
class PointGrid
{
public:
  PointGrid(std::span<const WorldPoint> points, double cell_size);

  /// Indices (ascending) of points within distance <= radius of `q`.
  std::vector<std::size_t> within(WorldPoint q, double radius) const;

private:
  std::int64_t cell_index(double v) const;

  std::vector<WorldPoint> points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

/// Greedy one-to-one matching: every (src, dst) pair within the radius is
/// visited by ascending distance (ties: lower src, then lower dst) and
/// accepted when both ends are still free.
DirectionalMatch match_directional(std::span<const WorldPoint> src, std::span<const WorldPoint> dst,
  const MatchConfig & cfg);

std::optional<double> median(std::vector<double> values);

/// Sorted matched distances with cumulative fraction (i + 1) / n.
struct CumulativeCurve
{
  std::vector<double> distances;
  std::vector<double> fractions;
  /// Smallest distance at which at least 90% of the matches are reached.
  std::optional<double> p90_m;
};

CumulativeCurve cumulative_shifts(const DirectionalMatch & m);

struct MatchReport
{
  MatchConfig config;
  std::size_t pred_count = 0;
  std::size_t gt_count = 0;
  DirectionalMatch pred2gt;
  DirectionalMatch gt2pred;
  CumulativeCurve pred2gt_curve;
  CumulativeCurve gt2pred_curve;
};

/// Pred2GT (source = predictions) and GT2Pred (source = ground truth).
/// Throws EmptyGroundTruth when `gts` is empty.
MatchReport evaluate(std::span<const WorldPoint> preds, std::span<const WorldPoint> gts, const MatchConfig & cfg);

/// One row of the per-site counting table.
struct CountingRow
{
  std::string site;
  std::optional<double> area_ha;
  std::size_t counts = 0;
  double pred2gt_ratio = 0.0;
  std::optional<double> pred2gt_median_m;
  double gt2pred_ratio = 0.0;
  std::optional<double> gt2pred_median_m;

  friend bool operator==(const CountingRow &, const CountingRow &) = default;
};

CountingRow counting_row(const MatchReport & report, std::string site, std::optional<double> area_ha);

inline constexpr const char * kCountingCsvHeader =
  "Site,Area (ha),Counts,Pred2GT Ratio,Pred2GT Median (m),GT2Pred Ratio,GT2Pred Median (m)";

std::string counting_row_csv(const CountingRow & row);
std::string counting_row_to_json(const CountingRow & row);
CountingRow counting_row_from_json(std::string_view text);

/// Full report: table row, both directions' matches, curves and the
/// alternate-discipline ratios when supplied.
std::string report_to_json(const MatchReport & report, const CountingRow & row,
  const MatchReport * alternate = nullptr);

/// distance,pred2gt_fraction / gt2pred_fraction in long form.
std::string cumulative_csv(const MatchReport & report);

/// Step plot of both curves with a dashed line at the 90% level.
std::string cumulative_svg(const MatchReport & report);

}  // namespace orthopipe
