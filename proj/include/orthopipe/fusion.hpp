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

#include <span>
#include <vector>

#include "orthopipe/backend.hpp"
#include "orthopipe/geo_raster.hpp"
#include "orthopipe/geometry.hpp"

namespace orthopipe
{

struct GlobalDetection
{
  Box box;
  double score = 0.0;
  std::optional<double> calibrated_score;
  int source_tile = 0;

  friend bool operator==(const GlobalDetection &, const GlobalDetection &) = default;
};

struct GeoPoint
{
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

/// Intersection over union; 0 for disjoint or degenerate boxes.
double iou(const Box & a, const Box & b) noexcept;

/// Offsets tile-local boxes by the tile origin and clips them to the raster.
/// Boxes that vanish under clipping are dropped.
std::vector<GlobalDetection> to_global(const TilePrediction & pred, int raster_w, int raster_h);

/// Total order used for ranking: score descending, then x1, y1, x2, y2 ascending.
bool nms_before(const GlobalDetection & a, const GlobalDetection & b) noexcept;

/// Greedy non-maximum suppression. Candidates are visited in nms_before order;
/// one is suppressed when its IoU with an already kept box exceeds
/// `iou_threshold`. A uniform grid keyed on the largest box side limits the
/// comparisons to spatial neighbours. The result is independent of input order.
std::vector<GlobalDetection> nms(std::vector<GlobalDetection> dets, double iou_threshold = 0.5);

/// Box centers mapped through the geotransform.
std::vector<GeoPoint> centers_to_geo(std::span<const GlobalDetection> dets, const GeoTransform & t);

}  // namespace orthopipe
