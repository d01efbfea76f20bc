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

#include "orthopipe/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "orthopipe/error.hpp"

namespace orthopipe
{

double iou(const Box & a, const Box & b) noexcept
{
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  return inter / (a.area() + b.area() - inter);
}

std::vector<GlobalDetection> to_global(const TilePrediction & pred, int raster_w, int raster_h)
{
  std::vector<GlobalDetection> out;
  out.reserve(pred.detections.size());
  for (const auto & d : pred.detections) {
    const Box g = d.box.translated(pred.tile.x0, pred.tile.y0)
                    .clipped(0.0, 0.0, static_cast<double>(raster_w), static_cast<double>(raster_h));
    if (g.valid()) {
      out.push_back({g, d.score, d.calibrated_score, pred.tile.index});
    }
  }
  return out;
}

bool nms_before(const GlobalDetection & a, const GlobalDetection & b) noexcept
{
  if (a.score != b.score) {
    return a.score > b.score;
  }
  if (a.box.x1 != b.box.x1) {
    return a.box.x1 < b.box.x1;
  }
  if (a.box.y1 != b.box.y1) {
    return a.box.y1 < b.box.y1;
  }
  if (a.box.x2 != b.box.x2) {
    return a.box.x2 < b.box.x2;
  }
  if (a.box.y2 != b.box.y2) {
    return a.box.y2 < b.box.y2;
  }
  if (a.source_tile != b.source_tile) {
    return a.source_tile < b.source_tile;
  }
  return a.calibrated_score.value_or(-1.0) < b.calibrated_score.value_or(-1.0);
}

std::vector<GlobalDetection> nms(std::vector<GlobalDetection> dets, double iou_threshold)
{
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "NMS IoU threshold must be in (0, 1]");
  }
  if (dets.empty()) {
    return dets;
  }
  std::sort(dets.begin(), dets.end(), nms_before);

  double cell = 0.0;
  double min_x = dets.front().box.x1;
  double min_y = dets.front().box.y1;
  for (const auto & d : dets) {
    cell = std::max({cell, d.box.width(), d.box.height()});
    min_x = std::min(min_x, d.box.x1);
    min_y = std::min(min_y, d.box.y1);
  }
  cell = std::max(cell, 1e-9);

  const auto cell_of = [&](double v, double origin) {
    return static_cast<std::int64_t>(std::floor((v - origin) / cell));
  };
  const auto key = [](std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint64_t>(cy & 0xffffffff);
  };

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
  std::vector<GlobalDetection> kept;
  for (const auto & cand : dets) {
    const auto cx0 = cell_of(cand.box.x1, min_x);
    const auto cx1 = cell_of(cand.box.x2, min_x);
    const auto cy0 = cell_of(cand.box.y1, min_y);
    const auto cy1 = cell_of(cand.box.y2, min_y);

    bool suppressed = false;
    for (auto cy = cy0; cy <= cy1 && !suppressed; ++cy) {
      for (auto cx = cx0; cx <= cx1 && !suppressed; ++cx) {
        const auto it = grid.find(key(cx, cy));
        if (it == grid.end()) {
          continue;
        }
        for (std::size_t k : it->second) {
          if (iou(kept[k].box, cand.box) > iou_threshold) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) {
      continue;
    }
    const std::size_t idx = kept.size();
    kept.push_back(cand);
    for (auto cy = cy0; cy <= cy1; ++cy) {
      for (auto cx = cx0; cx <= cx1; ++cx) {
        grid[key(cx, cy)].push_back(idx);
      }
    }
  }
  return kept;
}

std::vector<GeoPoint> centers_to_geo(std::span<const GlobalDetection> dets, const GeoTransform & t)
{
  std::vector<GeoPoint> out;
  out.reserve(dets.size());
  for (const auto & d : dets) {
    const WorldPoint w = pixel_to_world(t, d.box.center_x(), d.box.center_y());
    out.push_back({w.x, w.y, d.score});
  }
  return out;
}

}  // namespace orthopipe
