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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthopipe/backend.hpp"
#include "orthopipe/calibration.hpp"
#include "orthopipe/fusion.hpp"
#include "orthopipe/geo_raster.hpp"

namespace orthopipe
{

std::string read_text(const std::filesystem::path & path);
void write_text(const std::filesystem::path & path, std::string_view text);

/// Comma-separated table with a header row. Quoted fields ("a,b", "x""y")
/// are understood; blank lines are skipped.
struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path source;

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws IoFailure when the column is missing.
  std::size_t column(std::string_view name) const;
  /// Throws IoFailure when the cell is not a finite number.
  double number(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(std::string_view text, const std::filesystem::path & source = {});
CsvTable read_csv(const std::filesystem::path & path);

/// Point FeatureCollection; `scores`, when given, become a "score" property.
std::string points_to_geojson(std::span<const WorldPoint> points, std::span<const double> scores = {});

/// Points from CSV (x,y columns) or GeoJSON (.geojson/.json, Point features).
std::vector<WorldPoint> read_points(const std::filesystem::path & path);

std::string pairs_to_csv(std::span<const CalibrationPair> pairs);
/// CSV with header score,iou; both values must lie in [0, 1].
std::vector<CalibrationPair> read_pairs(const std::filesystem::path & path);

/// {"detections":[{"bbox":[...],"score":s,"calibrated_score":c|null,"source_tile":i}]}
std::string detections_to_json(std::span<const GlobalDetection> dets);
std::vector<GlobalDetection> detections_from_json(std::string_view text);

/// Centers as CSV x,y,score.
std::string centers_to_csv(std::span<const GeoPoint> points);

}  // namespace orthopipe
