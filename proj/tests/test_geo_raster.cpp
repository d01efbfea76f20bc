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
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include "orthopipe/error.hpp"
#include "orthopipe/geo_raster.hpp"
#include "orthopipe/image.hpp"

namespace orthopipe
{
namespace
{

ErrorKind kind_of(const std::function<void()> & f)
{
  try {
    f();
  } catch (const Error & e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::IoFailure;
}

std::filesystem::path temp_dir(const std::string & name)
{
  auto dir = std::filesystem::temp_directory_path() / ("orthopipe_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Image gradient_image(int w, int h, int bands)
{
  Image img(w, h, bands);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int b = 0; b < bands; ++b) {
        img.at(x, y, b) = static_cast<std::uint8_t>((x * 7 + y * 13 + b * 61) & 0xff);
      }
    }
  }
  return img;
}

// Brute-force coverage: mark every pixel column and row covered by some window.
bool axis_covered(int extent, const std::vector<int> & starts, int size)
{
  std::vector<char> hit(static_cast<std::size_t>(extent), 0);
  for (int s : starts) {
    for (int i = s; i < s + size && i < extent; ++i) {
      hit[static_cast<std::size_t>(i)] = 1;
    }
  }
  return std::all_of(hit.begin(), hit.end(), [](char c) { return c != 0; });
}

TEST(Worldfile, IdentityText)
{
  const auto t = parse_worldfile("1\n0\n0\n-1\n0\n0");
  EXPECT_EQ(t, GeoTransform::north_up(1.0, 0.0, 0.0));
}

TEST(Worldfile, SixCentimeterTransform)
{
  const auto t = parse_worldfile("0.06\n0\n0\n-0.06\n600000\n9950000\n");
  EXPECT_DOUBLE_EQ(t.pixel_width_x, 0.06);
  EXPECT_DOUBLE_EQ(t.pixel_height_y, -0.06);
  EXPECT_DOUBLE_EQ(t.origin_x, 600000.0);
  EXPECT_DOUBLE_EQ(t.origin_y, 9950000.0);
}

TEST(Worldfile, FieldOrderIsADBECF)
{
  const auto t = parse_worldfile("2\n0.5\n0.25\n-3\n10\n20");
  EXPECT_EQ(t.pixel_width_x, 2.0);
  EXPECT_EQ(t.pixel_width_y, 0.5);
  EXPECT_EQ(t.pixel_height_x, 0.25);
  EXPECT_EQ(t.pixel_height_y, -3.0);
  EXPECT_EQ(t.origin_x, 10.0);
  EXPECT_EQ(t.origin_y, 20.0);
}

TEST(Worldfile, SingularTransformRejected)
{
  EXPECT_EQ(kind_of([] { parse_worldfile("1\n0\n0\n0\n0\n0"); }), ErrorKind::SingularTransform);
}

TEST(Worldfile, MalformedInputs)
{
  for (const char * text : {"", "1\n0\n0\n-1\n0", "1\n0\n0\n-1\n0\n0\n7", "1\n0\nabc\n-1\n0\n0",
         "1\n0\n0\n-1\n0\nnan", "1\n0\n0\n-1\n0\n1e999", "1\n\n0\n-1\n0\n0"})
  {
    EXPECT_EQ(kind_of([&] { parse_worldfile(text); }), ErrorKind::MalformedWorldfile) << text;
  }
}

TEST(Worldfile, ToleratesCrlfAndTrailingBlankLines)
{
  const auto t = parse_worldfile("0.5\r\n0\r\n0\r\n-0.5\r\n1\r\n2\r\n\r\n\n");
  EXPECT_EQ(t, GeoTransform::north_up(0.5, 1.0, 2.0));
}

TEST(Worldfile, FormatRoundTripsExactly)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 200; ++i) {
    GeoTransform t{u(rng) * 1e-6 + 0.1, u(rng) * 1e-9, u(rng) * 1e-9, -0.1 - u(rng) * 1e-7, u(rng), u(rng)};
    EXPECT_EQ(parse_worldfile(format_worldfile(t)), t);
  }
}

TEST(Worldfile, MissingFileIsMalformed)
{
  EXPECT_EQ(kind_of([] { read_worldfile("/nonexistent/x.pgw"); }), ErrorKind::MalformedWorldfile);
}

TEST(Worldfile, SidecarNaming)
{
  EXPECT_EQ(worldfile_path_for("a/scene.png"), std::filesystem::path("a/scene.pgw"));
  EXPECT_EQ(worldfile_path_for("a/scene.tif"), std::filesystem::path("a/scene.tfw"));
  EXPECT_EQ(worldfile_path_for("scene.ppm"), std::filesystem::path("scene.pmw"));
}

TEST(Affine, PixelToWorldExamples)
{
  const auto id = GeoTransform::north_up(1.0, 0.0, 0.0);
  const auto w0 = pixel_to_world(id, 0.0, 0.0);
  EXPECT_EQ(w0.x, 0.0);
  EXPECT_EQ(w0.y, 0.0);
  const auto six = GeoTransform::north_up(0.06, 600000.0, 9950000.0);
  const auto w = pixel_to_world(six, 100.0, 200.0);
  EXPECT_NEAR(w.x, 600006.0, 1e-9);
  EXPECT_NEAR(w.y, 9949988.0, 1e-9);
}

TEST(Affine, WorldToPixelExamples)
{
  const auto id = GeoTransform::north_up(1.0, 0.0, 0.0);
  const auto p = world_to_pixel(id, 5.5, -3.25);
  EXPECT_DOUBLE_EQ(p.x, 5.5);
  EXPECT_DOUBLE_EQ(p.y, 3.25);
  const auto six = GeoTransform::north_up(0.06, 600000.0, 9950000.0);
  const auto o = world_to_pixel(six, 600000.0, 9950000.0);
  EXPECT_DOUBLE_EQ(o.x, 0.0);
  EXPECT_DOUBLE_EQ(o.y, 0.0);
}

TEST(Affine, WorldToPixelSingular)
{
  GeoTransform t{1.0, 2.0, 2.0, 4.0, 0.0, 0.0};
  EXPECT_EQ(kind_of([&] { world_to_pixel(t, 1.0, 1.0); }), ErrorKind::SingularTransform);
}

TEST(Affine, RotatedRoundTrip)
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> px(-5000.0, 5000.0);
  int checked = 0;
  while (checked < 500) {
    GeoTransform t{u(rng), u(rng), u(rng), u(rng), px(rng) * 2.0, px(rng) * 2.0};
    if (std::abs(t.determinant()) < 0.1) {
      continue;
    }
    ++checked;
    const PixelPoint p{px(rng), px(rng)};
    const auto back = world_to_pixel(t, pixel_to_world(t, p));
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
  }
}

TEST(Affine, ProjectedOriginRoundTripIsRelativelyExact)
{
  // UTM-sized coordinates carry about 1e-9 m of rounding, so the pixel error is bounded relative to |p|.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> gsd(0.01, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  std::uniform_real_distribution<double> px(0.0, 50000.0);
  for (int i = 0; i < 500; ++i) {
    const double g = gsd(rng);
    const double a = angle(rng);
    GeoTransform t{g * std::cos(a), g * std::sin(a), g * std::sin(a), -g * std::cos(a), 600000.0, 9950000.0};
    const PixelPoint p{px(rng), px(rng)};
    const auto back = world_to_pixel(t, pixel_to_world(t, p));
    const double scale = std::max({1.0, std::abs(p.x), std::abs(p.y)});
    EXPECT_LT(std::hypot(back.x - p.x, back.y - p.y) / scale, 1e-9);
  }
}

TEST(Tiling, SingleWindowWhenRasterEqualsTile)
{
  const auto tiles = tile_iter(800, 800, {800, 400});
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], (TileWindow{0, 0, 800, 800, 0}));
}

TEST(Tiling, LastWindowShiftedToEdge)
{
  const auto tiles = tile_iter(1200, 800, {800, 400});
  ASSERT_EQ(tiles.size(), 2u);
  EXPECT_EQ(tiles[0].x0, 0);
  EXPECT_EQ(tiles[1].x0, 400);
  EXPECT_EQ(tiles[1].x0 + tiles[1].w, 1200);
}

TEST(Tiling, NineByNineGrid)
{
  const auto tiles = tile_iter(4000, 4000, {800, 400});
  ASSERT_EQ(tiles.size(), 81u);
  EXPECT_EQ(tiles.back().x0, 3200);
  EXPECT_EQ(tiles.back().y0, 3200);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    EXPECT_EQ(tiles[i].index, static_cast<int>(i));
    EXPECT_EQ(tiles[i].w, 800);
    EXPECT_EQ(tiles[i].h, 800);
  }
}

TEST(Tiling, RowMajorOrder)
{
  const auto tiles = tile_iter(2000, 1300, {800, 300});
  for (std::size_t i = 1; i < tiles.size(); ++i) {
    const auto & a = tiles[i - 1];
    const auto & b = tiles[i];
    EXPECT_TRUE(a.y0 < b.y0 || (a.y0 == b.y0 && a.x0 < b.x0));
  }
}

TEST(Tiling, SmallRasterGetsOneClippedTile)
{
  const auto tiles = tile_iter(500, 300, {800, 400});
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], (TileWindow{0, 0, 500, 300, 0}));
}

TEST(Tiling, PartialAxisClipped)
{
  const auto tiles = tile_iter(1000, 300, {800, 400});
  ASSERT_EQ(tiles.size(), 2u);
  EXPECT_EQ(tiles[1], (TileWindow{200, 0, 800, 300, 1}));
}

TEST(Tiling, InvalidConfigs)
{
  EXPECT_EQ(kind_of([] { tile_iter(10, 10, {800, 0}); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { tile_iter(10, 10, {800, 801}); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { tile_iter(10, 10, {0, 0}); }), ErrorKind::InvalidConfig);
}

TEST(Tiling, CoverageAndInvariantsOnGrid)
{
  for (int tile : {1, 7, 64, 800}) {
    for (int stride = 1; stride <= tile; stride += std::max(1, tile / 5)) {
      for (int extent = 1; extent <= 1700; extent += 13) {
        const auto starts = tile_starts(extent, tile, stride);
        const int size = std::min(tile, extent);
        ASSERT_TRUE(axis_covered(extent, starts, size)) << extent << " " << tile << " " << stride;
        for (std::size_t i = 0; i < starts.size(); ++i) {
          ASSERT_GE(starts[i], 0);
          ASSERT_LE(starts[i] + size, extent);
          if (i > 0) {
            ASSERT_GT(starts[i], starts[i - 1]);
            ASSERT_LE(starts[i] - starts[i - 1], stride);
          }
        }
        ASSERT_EQ(starts.back() + size, extent);
      }
    }
  }
}

TEST(Tiling, PureFunction)
{
  EXPECT_EQ(tile_iter(3333, 2111, {512, 256}), tile_iter(3333, 2111, {512, 256}));
}

TEST(RasterRead, FullWindowAndSinglePixel)
{
  const Image img = gradient_image(37, 23, 3);
  MemoryRaster r(img);
  EXPECT_EQ(r.read_window({0, 0, 37, 23, 0}), img);
  const Image px = r.read_window({0, 0, 1, 1, 0});
  ASSERT_EQ(px.pixels.size(), 3u);
  EXPECT_EQ(px.at(0, 0, 0), img.at(0, 0, 0));
  EXPECT_EQ(px.at(0, 0, 2), img.at(0, 0, 2));
}

TEST(RasterRead, ClippedExtent)
{
  MemoryRaster r(gradient_image(40, 30, 1));
  const Image w = r.read_window({30, 20, 20, 20, 0});
  EXPECT_EQ(w.width, 10);
  EXPECT_EQ(w.height, 10);
  const Image n = r.read_window({-5, -5, 10, 10, 0});
  EXPECT_EQ(n.width, 5);
  EXPECT_EQ(n.height, 5);
  EXPECT_EQ(n.at(0, 0, 0), r.image().at(0, 0, 0));
  EXPECT_EQ(kind_of([&] { r.read_window({40, 0, 5, 5, 0}); }), ErrorKind::OutOfBounds);
  EXPECT_EQ(kind_of([&] { r.read_window({0, 0, 0, 5, 0}); }), ErrorKind::OutOfBounds);
}

TEST(RasterRead, OverlappingWindowsAgree)
{
  MemoryRaster r(gradient_image(64, 64, 3));
  const Image a = r.read_window({0, 0, 40, 40, 0});
  const Image b = r.read_window({20, 10, 40, 40, 1});
  for (int y = 10; y < 40; ++y) {
    for (int x = 20; x < 40; ++x) {
      for (int c = 0; c < 3; ++c) {
        ASSERT_EQ(a.at(x, y, c), b.at(x - 20, y - 10, c));
      }
    }
  }
}

TEST(RasterRead, PpmStreamingMatchesMemory)
{
  const auto dir = temp_dir("ppm");
  for (int bands : {1, 3}) {
    const Image img = gradient_image(53, 41, bands);
    const auto path = dir / (bands == 1 ? "g.pgm" : "c.ppm");
    write_ppm(img, path);
    const auto raster = open_raster(path, {});
    ASSERT_EQ(raster->width(), 53);
    ASSERT_EQ(raster->bands(), bands);
    MemoryRaster mem(img);
    for (const auto & w : tile_iter(53, 41, {16, 9})) {
      ASSERT_EQ(raster->read_window(w), mem.read_window(w));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(RasterRead, PngRoundTrip)
{
  const auto dir = temp_dir("png");
  for (int bands : {1, 3}) {
    const Image img = gradient_image(29, 31, bands);
    write_png(img, dir / "a.png");
    EXPECT_EQ(read_png(dir / "a.png"), img);
    const auto info = probe_image(dir / "a.png");
    EXPECT_EQ(info.width, 29);
    EXPECT_EQ(info.height, 31);
    EXPECT_EQ(info.bands, bands);
  }
  std::filesystem::remove_all(dir);
}

TEST(RasterRead, ConcurrentReadsAreConsistent)
{
  const auto dir = temp_dir("mt");
  const Image img = gradient_image(300, 200, 3);
  write_ppm(img, dir / "m.ppm");
  const auto raster = open_raster(dir / "m.ppm", {});
  const auto tiles = tile_iter(300, 200, {64, 32});
  std::vector<Image> expected;
  for (const auto & t : tiles) {
    expected.push_back(raster->read_window(t));
  }
  std::atomic<int> mismatches{0};
  {
    std::vector<std::jthread> pool;
    for (int k = 0; k < 4; ++k) {
      pool.emplace_back([&, k] {
        for (int rep = 0; rep < 5; ++rep) {
          for (std::size_t i = k; i < tiles.size(); i += 2) {
            if (!(raster->read_window(tiles[i]) == expected[i])) {
              ++mismatches;
            }
          }
        }
      });
    }
  }
  EXPECT_EQ(mismatches.load(), 0);
  std::filesystem::remove_all(dir);
}

TEST(RasterRead, TruncatedPpmIsIoFailure)
{
  const auto dir = temp_dir("trunc");
  {
    std::ofstream f(dir / "t.ppm", std::ios::binary);
    f << "P6\n10 10\n255\n" << std::string(50, 'x');
  }
  EXPECT_EQ(kind_of([&] { open_raster(dir / "t.ppm", {})->read_window({0, 0, 10, 10, 0}); }), ErrorKind::IoFailure);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace orthopipe
