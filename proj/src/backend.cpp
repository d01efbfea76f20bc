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

#include "orthopipe/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "orthopipe/error.hpp"
#include "orthopipe/random.hpp"

namespace orthopipe
{
namespace
{

constexpr std::uint64_t kObjectStream = 0x6f626a;    // "obj"
constexpr std::uint64_t kSpuriousStream = 0x737075;  // "spu"

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double box_iou(const Box & a, const Box & b)
{
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Per-object draws, identical in every tile that sees the object.
struct ObjectDraw
{
  bool dropped;
  double dx;
  double dy;
  double score_noise;
};

ObjectDraw draw_object(const OracleNoise & noise, std::uint64_t id)
{
  Rng rng(derive_seed({noise.seed, kObjectStream, id}));
  ObjectDraw d{};
  d.dropped = rng.bernoulli(noise.drop_rate);
  d.dx = rng.normal() * noise.center_jitter_sigma;
  d.dy = rng.normal() * noise.center_jitter_sigma;
  d.score_noise = rng.normal() * noise.score_law.sigma;
  return d;
}

}  // namespace

std::int64_t Mask::foreground() const
{
  return std::accumulate(bits.begin(), bits.end(), std::int64_t{0});
}

MaskRLE rle_encode(const Mask & mask)
{
  if (mask.w < 1 || mask.h < 1) {
    throw Error(ErrorKind::MalformedRLE, "mask dims must be >= 1");
  }
  MaskRLE rle{mask.w, mask.h, {}};
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (std::uint8_t bit : mask.bits) {
    const std::uint8_t v = bit ? 1 : 0;
    if (v != current) {
      rle.counts.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

Mask rle_decode(const MaskRLE & rle)
{
  if (rle.w < 1 || rle.h < 1) {
    throw Error(ErrorKind::MalformedRLE, "mask dims must be >= 1");
  }
  const std::int64_t total = static_cast<std::int64_t>(rle.w) * rle.h;
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const auto c = rle.counts[i];
    if (c < 0 || (c == 0 && i > 0)) {
      throw Error(ErrorKind::MalformedRLE, "invalid run length at index " + std::to_string(i));
    }
    sum += c;
    if (sum > total) {
      break;
    }
  }
  if (sum != total) {
    throw Error(ErrorKind::MalformedRLE,
      "run lengths sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
  }
  Mask mask(rle.w, rle.h);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const auto n = static_cast<std::size_t>(rle.counts[i]);
    if (i % 2 == 1) {
      std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(pos), n, std::uint8_t{1});
    }
    pos += n;
  }
  return mask;
}

void OracleNoise::validate() const
{
  const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(drop_rate) || !in01(spurious_rate) || !in01(min_visible_fraction) ||
    center_jitter_sigma < 0.0 || score_law.sigma < 0.0)
  {
    throw Error(ErrorKind::InvalidConfig, "oracle noise rates must be in [0,1] and sigmas >= 0");
  }
}

std::vector<TruthObject> restrict_to_tile(std::span<const TruthObject> truth, const TileWindow & tile)
{
  const Box window{static_cast<double>(tile.x0), static_cast<double>(tile.y0),
    static_cast<double>(tile.x0 + tile.w), static_cast<double>(tile.y0 + tile.h)};
  std::vector<TruthObject> local;
  for (const auto & obj : truth) {
    if (intersection_area(obj.box, window) > 0.0) {
      local.push_back({obj.id, obj.box.translated(-window.x1, -window.y1)});
    }
  }
  return local;
}

bool oracle_drops(const OracleNoise & noise, std::uint64_t id) { return draw_object(noise, id).dropped; }

int oracle_spurious_count(const OracleNoise & noise, int tile_index)
{
  Rng rng(derive_seed({noise.seed, kSpuriousStream, static_cast<std::uint64_t>(tile_index)}));
  return rng.poisson(noise.spurious_rate);
}

TilePrediction detect_oracle(const TileWindow & tile, std::span<const TruthObject> local_truth,
  const OracleNoise & noise)
{
  TilePrediction pred{tile, {}};
  const Box bounds{0.0, 0.0, static_cast<double>(tile.w), static_cast<double>(tile.h)};

  for (const auto & obj : local_truth) {
    const ObjectDraw d = draw_object(noise, obj.id);
    if (d.dropped) {
      continue;
    }
    const Box jittered = obj.box.translated(d.dx, d.dy);
    const Box visible = jittered.clipped(bounds.x1, bounds.y1, bounds.x2, bounds.y2);
    if (!visible.valid() || visible.area() < noise.min_visible_fraction * jittered.area() * (1.0 - 1e-12)) {
      continue;
    }
    const double simulated_iou = box_iou(visible, obj.box);
    pred.detections.push_back(
      {visible, clamp01(simulated_iou + noise.score_law.bias + d.score_noise), std::nullopt});
  }

  Rng rng(derive_seed({noise.seed, kSpuriousStream, static_cast<std::uint64_t>(tile.index)}));
  const int n_spurious = rng.poisson(noise.spurious_rate);
  for (int i = 0; i < n_spurious; ++i) {
    const double side = rng.uniform(16.0, 64.0);
    const double x1 = rng.uniform(0.0, std::max(1.0, tile.w - side));
    const double y1 = rng.uniform(0.0, std::max(1.0, tile.h - side));
    Box box{x1, y1, x1 + side, y1 + side};
    box = box.clipped(bounds.x1, bounds.y1, bounds.x2, bounds.y2);
    const double base = rng.uniform(0.01, 0.3);
    const double jitter = rng.normal() * noise.score_law.sigma;
    if (box.valid()) {
      pred.detections.push_back({box, clamp01(base + noise.score_law.bias + jitter), std::nullopt});
    }
  }
  return pred;
}

Mask ellipse_mask(int w, int h, const Box & box)
{
  Mask mask(w, h);
  const double cx = box.center_x();
  const double cy = box.center_y();
  const double rx = 0.5 * box.width();
  const double ry = 0.5 * box.height();
  if (rx <= 0.0 || ry <= 0.0) {
    return mask;
  }
  const int x_lo = std::max(0, static_cast<int>(std::floor(box.x1)));
  const int x_hi = std::min(w, static_cast<int>(std::ceil(box.x2)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(box.y1)));
  const int y_hi = std::min(h, static_cast<int>(std::ceil(box.y2)));
  for (int y = y_lo; y < y_hi; ++y) {
    const double ny = (y + 0.5 - cy) / ry;
    for (int x = x_lo; x < x_hi; ++x) {
      const double nx = (x + 0.5 - cx) / rx;
      if (nx * nx + ny * ny <= 1.0) {
        mask.at(x, y) = 1;
      }
    }
  }
  return mask;
}

std::vector<MaskRLE> segment_oracle(int tile_w, int tile_h, std::span<const Box> boxes)
{
  std::vector<MaskRLE> masks;
  masks.reserve(boxes.size());
  for (const auto & box : boxes) {
    masks.push_back(rle_encode(ellipse_mask(tile_w, tile_h, box)));
  }
  return masks;
}

OracleBackend::OracleBackend(std::vector<TruthObject> truth, OracleNoise noise)
: truth_(std::move(truth)), noise_(noise)
{
  noise_.validate();
}

TilePrediction OracleBackend::detect(const TileWindow & tile, const Image &)
{
  const auto local = restrict_to_tile(truth_, tile);
  return detect_oracle(tile, local, noise_);
}

std::vector<MaskRLE> OracleBackend::segment(const TileWindow & tile, const Image &, std::span<const Box> boxes)
{
  return segment_oracle(tile.w, tile.h, boxes);
}

}  // namespace orthopipe
