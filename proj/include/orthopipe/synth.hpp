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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "orthopipe/backend.hpp"
#include "orthopipe/geo_raster.hpp"
#include "orthopipe/image.hpp"

namespace orthopipe
{

struct SceneConfig
{
  int width = 2000;
  int height = 2000;
  double gsd = 0.06;
  int n_objects = 50;
  double radius_min = 20.0;
  double radius_max = 40.0;
  int arms_min = 6;
  int arms_max = 14;
  /// Minimum pixel distance between centers; 0 allows overlapping crowns.
  double min_center_gap = 0.0;
  /// Brightness varies by +/- this fraction across the scene diagonal.
  double illumination_gradient = 0.25;
  std::uint64_t seed = 0;
  /// World position of the center of pixel (0, 0).
  double origin_x = 600000.0;
  double origin_y = 9950000.0;
  int max_attempts_per_object = 1000;

  void validate() const;
  GeoTransform transform() const { return GeoTransform::north_up(gsd, origin_x, origin_y); }
};

struct PlantedObject
{
  std::uint64_t id = 0;
  double px = 0.0;
  double py = 0.0;
  double radius = 0.0;
  int arms = 0;
  double rotation = 0.0;
  double x = 0.0;  // world
  double y = 0.0;
};

struct SceneTruth
{
  int width = 0;
  int height = 0;
  GeoTransform transform;
  std::vector<PlantedObject> objects;
};

struct Scene
{
  SceneConfig config;
  SceneTruth truth;
  Image image;
};

/// Rejection-samples centers so every object lies fully inside the raster and
/// respects min_center_gap. Throws InfeasiblePlacement when an object cannot
/// be placed within max_attempts_per_object draws.
SceneTruth place_objects(const SceneConfig & cfg);

/// Value-noise background, star-shaped crowns, then the illumination ramp.
Image render_scene(const SceneConfig & cfg, const SceneTruth & truth);

Scene generate(const SceneConfig & cfg);

/// Square box of side 2*radius around each center, clipped to the raster.
std::vector<Box> truth_boxes(const SceneTruth & truth);
std::vector<TruthObject> truth_objects(const SceneTruth & truth);

struct SceneFiles
{
  std::filesystem::path raster;
  std::filesystem::path worldfile;
  std::filesystem::path truth_csv;
  std::filesystem::path truth_geojson;
  std::filesystem::path scene_json;
};

/// Writes <stem>.<png|ppm>, the world-file sidecar, <stem>.truth.csv,
/// <stem>.truth.geojson and <stem>.scene.json.
SceneFiles write_scene(const Scene & scene, const std::filesystem::path & dir, const std::string & stem = "scene",
  ImageFormat format = ImageFormat::Png);

/// Truth CSV columns: id,px,py,radius,x,y (arms and rotation are optional).
std::string format_truth_csv(const SceneTruth & truth);
SceneTruth read_truth_csv(const std::filesystem::path & path, int width, int height, const GeoTransform & t);

}  // namespace orthopipe
