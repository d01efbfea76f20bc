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

#include "orthopipe/geo_raster.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

std::string_view trim(std::string_view s)
{
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) {
    s.remove_prefix(1);
  }
  while (!s.empty() && is_space(s.back())) {
    s.remove_suffix(1);
  }
  return s;
}

void require_invertible(const GeoTransform & t)
{
  const double det = t.determinant();
  if (det == 0.0 || !std::isfinite(det)) {
    throw Error(ErrorKind::SingularTransform, "geotransform determinant is zero");
  }
}

}  // namespace

GeoTransform parse_worldfile(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(trim(text.substr(pos, end - pos)));
    if (nl == std::string_view::npos) {
      break;
    }
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) {
    lines.pop_back();
  }
  if (lines.size() != 6) {
    throw Error(ErrorKind::MalformedWorldfile,
      "expected 6 lines, found " + std::to_string(lines.size()));
  }

  double v[6];
  for (std::size_t i = 0; i < 6; ++i) {
    const auto line = lines[i];
    const char * first = line.data();
    if (!line.empty() && line.front() == '+') {
      ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, line.data() + line.size(), v[i]);
    if (line.empty() || ec != std::errc{} || ptr != line.data() + line.size() || !std::isfinite(v[i])) {
      throw Error(ErrorKind::MalformedWorldfile,
        "line " + std::to_string(i + 1) + " is not a number: '" + std::string(line) + "'");
    }
  }
  const GeoTransform t{v[0], v[1], v[2], v[3], v[4], v[5]};
  require_invertible(t);
  return t;
}

GeoTransform read_worldfile(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::MalformedWorldfile, "cannot open world file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_worldfile(ss.str());
}

std::string format_worldfile(const GeoTransform & t)
{
  std::string out;
  char buf[64];
  for (double v : {t.pixel_width_x, t.pixel_width_y, t.pixel_height_x, t.pixel_height_y, t.origin_x, t.origin_y}) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out += buf;
  }
  return out;
}

void write_worldfile(const GeoTransform & t, const std::filesystem::path & path)
{
  std::ofstream out(path);
  out << format_worldfile(t);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot write world file " + path.string());
  }
}

std::filesystem::path worldfile_path_for(const std::filesystem::path & raster)
{
  const std::string ext = raster.extension().string();
  std::filesystem::path out = raster;
  if (ext.size() >= 3) {
    out.replace_extension(std::string{'.', ext[1], ext.back(), 'w'});
  } else {
    out.replace_extension(".wld");
  }
  return out;
}

WorldPoint pixel_to_world(const GeoTransform & t, double px, double py) noexcept
{
  return {t.origin_x + t.pixel_width_x * px + t.pixel_height_x * py,
    t.origin_y + t.pixel_width_y * px + t.pixel_height_y * py};
}

WorldPoint pixel_to_world(const GeoTransform & t, PixelPoint p) noexcept
{
  return pixel_to_world(t, p.x, p.y);
}

PixelPoint world_to_pixel(const GeoTransform & t, double x, double y)
{
  require_invertible(t);
  const double det = t.determinant();
  const double dx = x - t.origin_x;
  const double dy = y - t.origin_y;
  return {(t.pixel_height_y * dx - t.pixel_height_x * dy) / det,
    (t.pixel_width_x * dy - t.pixel_width_y * dx) / det};
}

PixelPoint world_to_pixel(const GeoTransform & t, WorldPoint w) { return world_to_pixel(t, w.x, w.y); }

void TilingConfig::validate() const
{
  if (tile < 1 || stride < 1 || stride > tile) {
    throw Error(ErrorKind::InvalidConfig, "tiling requires 1 <= stride <= tile (tile=" +
      std::to_string(tile) + ", stride=" + std::to_string(stride) + ")");
  }
}

std::vector<int> tile_starts(int extent, int tile, int stride)
{
  if (extent <= tile) {
    return {0};
  }
  std::vector<int> starts;
  int s = 0;
  for (;;) {
    starts.push_back(s);
    if (s + tile >= extent) {
      break;
    }
    s += stride;
    if (s + tile > extent) {
      starts.push_back(extent - tile);
      break;
    }
  }
  return starts;
}

std::vector<TileWindow> tile_iter(int width, int height, const TilingConfig & cfg)
{
  cfg.validate();
  const auto xs = tile_starts(width, cfg.tile, cfg.stride);
  const auto ys = tile_starts(height, cfg.tile, cfg.stride);
  const int tw = std::min(cfg.tile, width);
  const int th = std::min(cfg.tile, height);
  std::vector<TileWindow> tiles;
  tiles.reserve(xs.size() * ys.size());
  for (int y0 : ys) {
    for (int x0 : xs) {
      tiles.push_back({x0, y0, tw, th, static_cast<int>(tiles.size())});
    }
  }
  return tiles;
}

TileWindow RasterSource::clamp(const TileWindow & window) const
{
  if (window.w <= 0 || window.h <= 0 || window.x0 >= width() || window.y0 >= height() ||
    window.x0 + window.w <= 0 || window.y0 + window.h <= 0)
  {
    throw Error(ErrorKind::OutOfBounds, "window (" + std::to_string(window.x0) + "," +
      std::to_string(window.y0) + "," + std::to_string(window.w) + "," + std::to_string(window.h) +
      ") does not overlap the raster");
  }
  TileWindow c = window;
  c.x0 = std::max(0, window.x0);
  c.y0 = std::max(0, window.y0);
  c.w = std::min(width(), window.x0 + window.w) - c.x0;
  c.h = std::min(height(), window.y0 + window.h) - c.y0;
  return c;
}

Image RasterSource::read_window(const TileWindow & window) const
{
  const TileWindow c = clamp(window);
  Image out(c.w, c.h, bands());
  read_clamped(c, out);
  return out;
}

MemoryRaster::MemoryRaster(Image image, GeoTransform t) : image_(std::move(image))
{
  if (image_.width < 1 || image_.height < 1) {
    throw Error(ErrorKind::IoFailure, "raster must be at least 1x1");
  }
  set_transform(t);
}

void MemoryRaster::read_clamped(const TileWindow & window, Image & out) const
{
  const std::size_t span = static_cast<std::size_t>(window.w) * bands();
  for (int y = 0; y < window.h; ++y) {
    const auto src = image_.row(window.y0 + y).subspan(static_cast<std::size_t>(window.x0) * bands(), span);
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
}

PpmRaster::PpmRaster(const std::filesystem::path & path, GeoTransform t)
: path_(path), header_(read_ppm_header(path))
{
  fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd_ < 0) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  set_transform(t);
}

PpmRaster::~PpmRaster()
{
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

void PpmRaster::read_clamped(const TileWindow & window, Image & out) const
{
  const std::size_t span = static_cast<std::size_t>(window.w) * bands();
  const std::uint64_t row_bytes = static_cast<std::uint64_t>(width()) * bands();
  for (int y = 0; y < window.h; ++y) {
    const std::uint64_t offset = header_.data_offset + (window.y0 + y) * row_bytes +
      static_cast<std::uint64_t>(window.x0) * bands();
    auto * dst = out.row(y).data();
    std::size_t done = 0;
    while (done < span) {
      const ssize_t n = ::pread(fd_, dst + done, span - done, static_cast<off_t>(offset + done));
      if (n <= 0) {
        throw Error(ErrorKind::IoFailure, "short read from " + path_.string());
      }
      done += static_cast<std::size_t>(n);
    }
  }
}

std::unique_ptr<RasterSource> open_raster(const std::filesystem::path & path, const GeoTransform & t)
{
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::IoFailure, "raster not found: " + path.string());
  }
  if (format_for(path) == ImageFormat::Ppm) {
    return std::make_unique<PpmRaster>(path, t);
  }
  return std::make_unique<MemoryRaster>(read_png(path), t);
}

}  // namespace orthopipe
