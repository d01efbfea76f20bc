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
#include <optional>
#include <span>
#include <vector>

#include "orthopipe/geo_raster.hpp"
#include "orthopipe/geometry.hpp"
#include "orthopipe/image.hpp"

namespace orthopipe
{

struct Detection
{
  Box box;
  double score = 0.0;
  std::optional<double> calibrated_score;
};

/// Detections for one tile, in tile-local pixel coordinates.
struct TilePrediction
{
  TileWindow tile;
  std::vector<Detection> detections;
};

/// Binary mask, row-major, one byte per pixel (0 or 1).
struct Mask
{
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int width, int height) : w(width), h(height), bits(static_cast<std::size_t>(width) * height, 0) {}

  std::uint8_t & at(int x, int y) { return bits[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * w + x]; }
  std::int64_t foreground() const;

  friend bool operator==(const Mask &, const Mask &) = default;
};

/// Row-major run lengths alternating background/foreground, starting with
/// background. Only counts[0] may be zero.
struct MaskRLE
{
  int w = 0;
  int h = 0;
  std::vector<std::int64_t> counts;

  friend bool operator==(const MaskRLE &, const MaskRLE &) = default;
};

MaskRLE rle_encode(const Mask & mask);
/// Throws MalformedRLE on bad dims, negative or misplaced zero runs, or a
/// count total different from w*h.
Mask rle_decode(const MaskRLE & rle);

/// Maps a simulated IoU to an emitted confidence:
/// clamp(iou + bias + Normal(0, sigma), 0, 1).
struct ScoreLaw
{
  double bias = 0.0;
  double sigma = 0.05;
};

struct OracleNoise
{
  double drop_rate = 0.0;
  /// Expected false positives per tile (Poisson mean).
  double spurious_rate = 0.0;
  double center_jitter_sigma = 0.0;
  ScoreLaw score_law{};
  std::uint64_t seed = 0;
  /// Objects whose (jittered) box is less visible than this inside a tile are
  /// not reported for that tile. Above 0.75 any two reported crops of one
  /// object overlap with IoU > 0.5, so cross-tile copies always collapse.
  double min_visible_fraction = 0.8;

  static OracleNoise noiseless(std::uint64_t seed = 0)
  {
    OracleNoise n;
    n.score_law.sigma = 0.0;
    n.seed = seed;
    return n;
  }

  void validate() const;
};

/// Planted object: stable id plus its raster-clipped truth box.
struct TruthObject
{
  std::uint64_t id = 0;
  Box box;
};

/// Objects whose box intersects the tile, translated to tile-local pixels
/// (boxes are not clipped to the tile).
std::vector<TruthObject> restrict_to_tile(std::span<const TruthObject> truth, const TileWindow & tile);

/// Whether the oracle omits object `id`. Decided per object, so every tile
/// agrees.
bool oracle_drops(const OracleNoise & noise, std::uint64_t id);

/// Number of false positives the oracle plants in tile `tile_index`.
int oracle_spurious_count(const OracleNoise & noise, int tile_index);

/// Deterministic stand-in detector; `local_truth` is tile-local.
TilePrediction detect_oracle(const TileWindow & tile, std::span<const TruthObject> local_truth,
  const OracleNoise & noise);

/// Inscribed ellipse of `box`, rasterized on a w x h grid by sampling pixel
/// centers (x + 0.5, y + 0.5).
Mask ellipse_mask(int w, int h, const Box & box);

/// One mask per box, each the size of the tile.
std::vector<MaskRLE> segment_oracle(int tile_w, int tile_h, std::span<const Box> boxes);

class DetectorBackend
{
public:
  virtual ~DetectorBackend() = default;
  virtual TilePrediction detect(const TileWindow & tile, const Image & pixels) = 0;
};

class SegmenterBackend
{
public:
  virtual ~SegmenterBackend() = default;
  virtual std::vector<MaskRLE> segment(const TileWindow & tile, const Image & pixels,
    std::span<const Box> boxes) = 0;
};

/// Oracle over a planted scene; pure and reentrant, so one instance may be
/// shared by every worker.
class OracleBackend final : public DetectorBackend, public SegmenterBackend
{
public:
  OracleBackend(std::vector<TruthObject> truth, OracleNoise noise);

  TilePrediction detect(const TileWindow & tile, const Image & pixels) override;
  std::vector<MaskRLE> segment(const TileWindow & tile, const Image & pixels,
    std::span<const Box> boxes) override;

  const OracleNoise & noise() const noexcept { return noise_; }

private:
  std::vector<TruthObject> truth_;
  OracleNoise noise_;
};

}  // namespace orthopipe
