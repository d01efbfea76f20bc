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

#include "orthopipe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "orthopipe/error.hpp"
#include "orthopipe/formats.hpp"
#include "orthopipe/random.hpp"

namespace orthopipe
{
namespace
{

constexpr std::uint64_t kPlacementStream = 1;
constexpr std::uint64_t kTextureStream = 2;

std::string fmt17(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Lattice of random values blended with a smoothstep; one octave.
class ValueNoise
{
public:
  ValueNoise(int width, int height, int spacing, Rng & rng)
  : spacing_(spacing), nx_(width / spacing + 2), ny_(height / spacing + 2),
    lattice_(static_cast<std::size_t>(nx_) * ny_)
  {
    for (auto & v : lattice_) {
      v = rng.uniform(-1.0, 1.0);
    }
  }

  double at(int x, int y) const
  {
    const int gx = x / spacing_;
    const int gy = y / spacing_;
    const double fx = smooth(static_cast<double>(x % spacing_) / spacing_);
    const double fy = smooth(static_cast<double>(y % spacing_) / spacing_);
    const double top = lerp(node(gx, gy), node(gx + 1, gy), fx);
    const double bottom = lerp(node(gx, gy + 1), node(gx + 1, gy + 1), fx);
    return lerp(top, bottom, fy);
  }

private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  static double lerp(double a, double b, double t) { return a + (b - a) * t; }
  double node(int gx, int gy) const { return lattice_[static_cast<std::size_t>(gy) * nx_ + gx]; }

  int spacing_;
  int nx_;
  int ny_;
  std::vector<double> lattice_;
};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

void SceneConfig::validate() const
{
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidConfig, "scene dims must be >= 1");
  }
  if (!(gsd > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "gsd must be positive");
  }
  if (n_objects < 0) {
    throw Error(ErrorKind::InvalidConfig, "n_objects must be >= 0");
  }
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    throw Error(ErrorKind::InvalidConfig, "radius range must be positive and ordered");
  }
  if (arms_min < 3 || arms_max < arms_min) {
    throw Error(ErrorKind::InvalidConfig, "arm range must be ordered and >= 3");
  }
  if (min_center_gap < 0.0 || illumination_gradient < 0.0 || illumination_gradient >= 1.0) {
    throw Error(ErrorKind::InvalidConfig, "min_center_gap must be >= 0, illumination in [0, 1)");
  }
  if (max_attempts_per_object < 1) {
    throw Error(ErrorKind::InvalidConfig, "max_attempts_per_object must be >= 1");
  }
}

SceneTruth place_objects(const SceneConfig & cfg)
{
  cfg.validate();
  SceneTruth truth{cfg.width, cfg.height, cfg.transform(), {}};
  Rng rng(derive_seed({cfg.seed, kPlacementStream}));

  const double cell = std::max(cfg.min_center_gap, 1.0);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
  const auto key = [](std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint64_t>(cy & 0xffffffff);
  };
  const double gap2 = cfg.min_center_gap * cfg.min_center_gap;

  for (int n = 0; n < cfg.n_objects; ++n) {
    const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
    const int arms = static_cast<int>(rng.uniform_int(cfg.arms_min, cfg.arms_max));
    const double rotation = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double lo_x = std::min(radius, 0.5 * cfg.width);
    const double lo_y = std::min(radius, 0.5 * cfg.height);

    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts_per_object && !placed; ++attempt) {
      const double px = rng.uniform(lo_x, cfg.width - lo_x);
      const double py = rng.uniform(lo_y, cfg.height - lo_y);
      const auto cx = static_cast<std::int64_t>(std::floor(px / cell));
      const auto cy = static_cast<std::int64_t>(std::floor(py / cell));
      bool clear = true;
      if (cfg.min_center_gap > 0.0) {
        for (auto gy = cy - 1; gy <= cy + 1 && clear; ++gy) {
          for (auto gx = cx - 1; gx <= cx + 1 && clear; ++gx) {
            const auto it = grid.find(key(gx, gy));
            if (it == grid.end()) {
              continue;
            }
            for (std::size_t k : it->second) {
              const auto & o = truth.objects[k];
              if ((o.px - px) * (o.px - px) + (o.py - py) * (o.py - py) < gap2) {
                clear = false;
                break;
              }
            }
          }
        }
      }
      if (!clear) {
        continue;
      }
      const WorldPoint w = pixel_to_world(truth.transform, px, py);
      grid[key(cx, cy)].push_back(truth.objects.size());
      truth.objects.push_back({static_cast<std::uint64_t>(n), px, py, radius, arms, rotation, w.x, w.y});
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorKind::InfeasiblePlacement, "could not place object " + std::to_string(n) + " of " +
        std::to_string(cfg.n_objects) + " with min_center_gap " + fmt17(cfg.min_center_gap));
    }
  }
  return truth;
}

Image render_scene(const SceneConfig & cfg, const SceneTruth & truth)
{
  Image image(cfg.width, cfg.height, 3);
  Rng rng(derive_seed({cfg.seed, kTextureStream}));
  const ValueNoise coarse(cfg.width, cfg.height, 48, rng);
  const ValueNoise fine(cfg.width, cfg.height, 12, rng);

  // Float canvas so the illumination ramp is applied once at the end.
  std::vector<float> canvas(static_cast<std::size_t>(cfg.width) * cfg.height * 3);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const double n = 0.7 * coarse.at(x, y) + 0.3 * fine.at(x, y);
      float * px = &canvas[(static_cast<std::size_t>(y) * cfg.width + x) * 3];
      px[0] = static_cast<float>(45.0 + 22.0 * n);
      px[1] = static_cast<float>(78.0 + 30.0 * n);
      px[2] = static_cast<float>(38.0 + 15.0 * n);
    }
  }

  for (const auto & obj : truth.objects) {
    const int x0 = std::max(0, static_cast<int>(std::floor(obj.px - obj.radius)));
    const int x1 = std::min(cfg.width, static_cast<int>(std::ceil(obj.px + obj.radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(obj.py - obj.radius)));
    const int y1 = std::min(cfg.height, static_cast<int>(std::ceil(obj.py + obj.radius)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const double dx = x + 0.5 - obj.px;
        const double dy = y + 0.5 - obj.py;
        const double rho = std::hypot(dx, dy);
        const double theta = std::atan2(dy, dx) - obj.rotation;
        const double edge = obj.radius * (0.45 + 0.55 * std::abs(std::cos(0.5 * obj.arms * theta)));
        if (rho > edge) {
          continue;
        }
        const double shade = 1.0 - 0.35 * rho / obj.radius;
        float * px = &canvas[(static_cast<std::size_t>(y) * cfg.width + x) * 3];
        px[0] = static_cast<float>(150.0 * shade);
        px[1] = static_cast<float>(205.0 * shade);
        px[2] = static_cast<float>(70.0 * shade);
      }
    }
  }

  const double span = static_cast<double>(cfg.width + cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const double light = 1.0 + cfg.illumination_gradient * (2.0 * (x + y) / span - 1.0);
      const float * src = &canvas[(static_cast<std::size_t>(y) * cfg.width + x) * 3];
      for (int b = 0; b < 3; ++b) {
        image.at(x, y, b) = to_byte(src[b] * light);
      }
    }
  }
  return image;
}

Scene generate(const SceneConfig & cfg)
{
  Scene scene{cfg, place_objects(cfg), {}};
  scene.image = render_scene(cfg, scene.truth);
  return scene;
}

std::vector<Box> truth_boxes(const SceneTruth & truth)
{
  std::vector<Box> boxes;
  boxes.reserve(truth.objects.size());
  for (const auto & o : truth.objects) {
    boxes.push_back(Box{o.px - o.radius, o.py - o.radius, o.px + o.radius, o.py + o.radius}.clipped(
      0.0, 0.0, static_cast<double>(truth.width), static_cast<double>(truth.height)));
  }
  return boxes;
}

std::vector<TruthObject> truth_objects(const SceneTruth & truth)
{
  const auto boxes = truth_boxes(truth);
  std::vector<TruthObject> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out.push_back({truth.objects[i].id, boxes[i]});
  }
  return out;
}

std::string format_truth_csv(const SceneTruth & truth)
{
  std::string out = "id,px,py,radius,x,y,arms,rotation\n";
  for (const auto & o : truth.objects) {
    out += std::to_string(o.id) + "," + fmt17(o.px) + "," + fmt17(o.py) + "," + fmt17(o.radius) + "," +
      fmt17(o.x) + "," + fmt17(o.y) + "," + std::to_string(o.arms) + "," + fmt17(o.rotation) + "\n";
  }
  return out;
}

SceneTruth read_truth_csv(const std::filesystem::path & path, int width, int height, const GeoTransform & t)
{
  const CsvTable table = read_csv(path);
  const std::size_t c_id = table.column("id");
  const std::size_t c_px = table.column("px");
  const std::size_t c_py = table.column("py");
  const std::size_t c_r = table.column("radius");
  const auto c_arms = table.find_column("arms");
  const auto c_rot = table.find_column("rotation");

  SceneTruth truth{width, height, t, {}};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    PlantedObject o;
    o.id = static_cast<std::uint64_t>(table.number(i, c_id));
    o.px = table.number(i, c_px);
    o.py = table.number(i, c_py);
    o.radius = table.number(i, c_r);
    o.arms = c_arms ? static_cast<int>(table.number(i, *c_arms)) : 0;
    o.rotation = c_rot ? table.number(i, *c_rot) : 0.0;
    const WorldPoint w = pixel_to_world(t, o.px, o.py);
    o.x = w.x;
    o.y = w.y;
    truth.objects.push_back(o);
  }
  return truth;
}

SceneFiles write_scene(const Scene & scene, const std::filesystem::path & dir, const std::string & stem,
  ImageFormat format)
{
  std::filesystem::create_directories(dir);
  SceneFiles files;
  files.raster = dir / (stem + (format == ImageFormat::Png ? ".png" : ".ppm"));
  files.worldfile = worldfile_path_for(files.raster);
  files.truth_csv = dir / (stem + ".truth.csv");
  files.truth_geojson = dir / (stem + ".truth.geojson");
  files.scene_json = dir / (stem + ".scene.json");

  write_image(scene.image, files.raster);
  write_worldfile(scene.truth.transform, files.worldfile);
  write_text(files.truth_csv, format_truth_csv(scene.truth));

  std::vector<WorldPoint> centers;
  for (const auto & o : scene.truth.objects) {
    centers.push_back({o.x, o.y});
  }
  write_text(files.truth_geojson, points_to_geojson(centers));

  const auto & c = scene.config;
  const nlohmann::json echo = {
    {"width", c.width}, {"height", c.height}, {"gsd", c.gsd}, {"n_objects", c.n_objects},
    {"radius_min", c.radius_min}, {"radius_max", c.radius_max}, {"arms_min", c.arms_min},
    {"arms_max", c.arms_max}, {"min_center_gap", c.min_center_gap},
    {"illumination_gradient", c.illumination_gradient}, {"seed", c.seed}, {"origin_x", c.origin_x},
    {"origin_y", c.origin_y}, {"raster", files.raster.filename().string()},
    {"worldfile", files.worldfile.filename().string()}, {"truth_csv", files.truth_csv.filename().string()},
    {"prng", "mt19937_64 seeded through splitmix64"}};
  write_text(files.scene_json, echo.dump(2) + "\n");
  return files;
}

}  // namespace orthopipe
