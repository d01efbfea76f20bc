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
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace orthopipe
{

/// 8-bit interleaved raster buffer, row-major (h x w x bands).
struct Image
{
  int width = 0;
  int height = 0;
  int bands = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int b, std::uint8_t fill = 0)
  : width(w), height(h), bands(b), pixels(static_cast<std::size_t>(w) * h * b, fill)
  {}

  std::size_t row_stride() const noexcept { return static_cast<std::size_t>(width) * bands; }

  std::span<std::uint8_t> row(int y) { return {pixels.data() + y * row_stride(), row_stride()}; }
  std::span<const std::uint8_t> row(int y) const
  {
    return {pixels.data() + y * row_stride(), row_stride()};
  }

  std::uint8_t & at(int x, int y, int b) { return pixels[(y * row_stride()) + x * bands + b]; }
  std::uint8_t at(int x, int y, int b) const { return pixels[(y * row_stride()) + x * bands + b]; }

  friend bool operator==(const Image &, const Image &) = default;
};

struct PpmHeader
{
  int width = 0;
  int height = 0;
  int bands = 0;
  std::uint64_t data_offset = 0;
};

/// Parses a binary P6 (RGB) or P5 (gray) header with maxval 255.
PpmHeader read_ppm_header(const std::filesystem::path & path);

Image read_ppm(const std::filesystem::path & path);
void write_ppm(const Image & image, const std::filesystem::path & path);

Image read_png(const std::filesystem::path & path);
void write_png(const Image & image, const std::filesystem::path & path, int compression_level = 3);

struct ImageInfo
{
  int width = 0;
  int height = 0;
  int bands = 0;
};

/// Dimensions from the file header without decoding pixels.
ImageInfo probe_image(const std::filesystem::path & path);

enum class ImageFormat { Png, Ppm };

/// Format from the file extension (.png, .ppm/.pgm/.pnm); throws IoFailure otherwise.
ImageFormat format_for(const std::filesystem::path & path);

Image read_image(const std::filesystem::path & path);
void write_image(const Image & image, const std::filesystem::path & path);

}  // namespace orthopipe
