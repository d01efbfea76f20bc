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

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "orthopipe/image.hpp"

namespace orthopipe
{

/// Affine pixel -> world mapping in world-file terms (lines A, D, B, E, C, F).
///
///   x = origin_x + pixel_width_x  * px + pixel_height_x * py
///   y = origin_y + pixel_width_y  * px + pixel_height_y * py
///
/// (origin_x, origin_y) is the world position of the CENTER of pixel (0, 0).
/// World coordinates are projected meters; no reprojection is ever done.
struct GeoTransform
{
  double pixel_width_x = 1.0;   // A
  double pixel_width_y = 0.0;   // D, row rotation
  double pixel_height_x = 0.0;  // B, column rotation
  double pixel_height_y = -1.0; // E, negative for north-up
  double origin_x = 0.0;        // C
  double origin_y = 0.0;        // F

  double determinant() const noexcept
  {
    return pixel_width_x * pixel_height_y - pixel_height_x * pixel_width_y;
  }

  /// North-up transform with square pixels of `gsd` meters.
  static GeoTransform north_up(double gsd, double origin_x, double origin_y)
  {
    return {gsd, 0.0, 0.0, -gsd, origin_x, origin_y};
  }

  friend bool operator==(const GeoTransform &, const GeoTransform &) = default;
};

struct PixelPoint
{
  double x = 0.0;
  double y = 0.0;
};

struct WorldPoint
{
  double x = 0.0;
  double y = 0.0;
};

/// Parses the six decimal lines of a world file. Blank trailing lines are
/// tolerated; anything else that is not exactly six numbers is rejected.
GeoTransform parse_worldfile(std::string_view text);
GeoTransform read_worldfile(const std::filesystem::path & path);

/// Six lines, full round-trip precision.
std::string format_worldfile(const GeoTransform & t);
void write_worldfile(const GeoTransform & t, const std::filesystem::path & path);

/// Conventional sidecar name: first and last letter of the extension plus
/// 'w' (scene.png -> scene.pgw, scene.tif -> scene.tfw).
std::filesystem::path worldfile_path_for(const std::filesystem::path & raster);

WorldPoint pixel_to_world(const GeoTransform & t, PixelPoint p) noexcept;
WorldPoint pixel_to_world(const GeoTransform & t, double px, double py) noexcept;
PixelPoint world_to_pixel(const GeoTransform & t, WorldPoint w);
PixelPoint world_to_pixel(const GeoTransform & t, double x, double y);

struct TilingConfig
{
  int tile = 800;
  int stride = 400;

  void validate() const;
};

struct TileWindow
{
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  int index = 0;

  friend bool operator==(const TileWindow &, const TileWindow &) = default;
};

/// Start offsets along one axis. Every offset is a multiple of the stride
/// except possibly the last, which is shifted back so the final window ends
/// exactly at `extent`. A single window of length `extent` is returned when
/// the axis is shorter than one tile.
std::vector<int> tile_starts(int extent, int tile, int stride);

/// Row-major windows covering a width x height raster.
std::vector<TileWindow> tile_iter(int width, int height, const TilingConfig & cfg);

/// Windowed, read-only raster. read_window is safe to call concurrently.
class RasterSource
{
public:
  virtual ~RasterSource() = default;

  virtual int width() const noexcept = 0;
  virtual int height() const noexcept = 0;
  virtual int bands() const noexcept = 0;

  /// Returns the window clipped to the raster. Throws OutOfBounds when the
  /// window has no overlap with the raster or a non-positive size.
  Image read_window(const TileWindow & window) const;

  /// Clips `window` to the raster; throws OutOfBounds if not clampable.
  TileWindow clamp(const TileWindow & window) const;

  const GeoTransform & transform() const noexcept { return transform_; }
  void set_transform(const GeoTransform & t) { transform_ = t; }

protected:
  virtual void read_clamped(const TileWindow & window, Image & out) const = 0;

private:
  GeoTransform transform_{};
};

/// Raster held fully in memory (decoded PNG, or built in code).
class MemoryRaster final : public RasterSource
{
public:
  explicit MemoryRaster(Image image, GeoTransform t = {});

  int width() const noexcept override { return image_.width; }
  int height() const noexcept override { return image_.height; }
  int bands() const noexcept override { return image_.bands; }
  const Image & image() const noexcept { return image_; }

protected:
  void read_clamped(const TileWindow & window, Image & out) const override;

private:
  Image image_;
};

/// Binary PPM/PGM read row-by-row with positional reads; never loads the whole file.
class PpmRaster final : public RasterSource
{
public:
  PpmRaster(const std::filesystem::path & path, GeoTransform t = {});
  ~PpmRaster() override;
  PpmRaster(const PpmRaster &) = delete;
  PpmRaster & operator=(const PpmRaster &) = delete;

  int width() const noexcept override { return header_.width; }
  int height() const noexcept override { return header_.height; }
  int bands() const noexcept override { return header_.bands; }

protected:
  void read_clamped(const TileWindow & window, Image & out) const override;

private:
  std::filesystem::path path_;
  PpmHeader header_;
  int fd_ = -1;
};

/// Opens a raster by extension: PPM/PGM are streamed, PNG is decoded once.
std::unique_ptr<RasterSource> open_raster(const std::filesystem::path & path, const GeoTransform & t);

inline Image read_window(const RasterSource & raster, const TileWindow & window)
{
  return raster.read_window(window);
}

}  // namespace orthopipe
