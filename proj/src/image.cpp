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

#include "orthopipe/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

struct FileCloser
{
  void operator()(std::FILE * f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Reads one whitespace/comment separated header token.
std::string next_token(std::istream & in)
{
  std::string token;
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') {
        ch = in.get();
      }
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch)) {
    token.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return token;
}

int parse_dim(const std::string & token, const std::filesystem::path & path)
{
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v < 1) {
      throw std::invalid_argument(token);
    }
    return v;
  } catch (const std::exception &) {
    throw Error(ErrorKind::IoFailure, "bad PNM header in " + path.string());
  }
}

}  // namespace

PpmHeader read_ppm_header(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  const std::string magic = next_token(in);
  PpmHeader header;
  if (magic == "P6") {
    header.bands = 3;
  } else if (magic == "P5") {
    header.bands = 1;
  } else {
    throw Error(ErrorKind::IoFailure, "not a binary PPM/PGM: " + path.string());
  }
  header.width = parse_dim(next_token(in), path);
  header.height = parse_dim(next_token(in), path);
  if (parse_dim(next_token(in), path) != 255) {
    throw Error(ErrorKind::IoFailure, "only 8-bit PNM supported: " + path.string());
  }
  // next_token consumed the single whitespace byte after maxval.
  header.data_offset = static_cast<std::uint64_t>(in.tellg());
  return header;
}

Image read_ppm(const std::filesystem::path & path)
{
  const PpmHeader header = read_ppm_header(path);
  Image image(header.width, header.height, header.bands);
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(header.data_offset));
  in.read(reinterpret_cast<char *>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!in) {
    throw Error(ErrorKind::IoFailure, "truncated PNM data in " + path.string());
  }
  return image;
}

void write_ppm(const Image & image, const std::filesystem::path & path)
{
  if (image.bands != 1 && image.bands != 3) {
    throw Error(ErrorKind::IoFailure, "PNM supports 1 or 3 bands");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  }
  out << (image.bands == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char *>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) {
    throw Error(ErrorKind::IoFailure, "short write to " + path.string());
  }
}

Image read_png(const std::filesystem::path & path)
{
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error(ErrorKind::IoFailure, "cannot read PNG " + path.string() + ": " + png.message);
  }
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image image(static_cast<int>(png.width), static_cast<int>(png.height), gray ? 1 : 3);
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw Error(ErrorKind::IoFailure, "cannot decode PNG " + path.string() + ": " + message);
  }
  return image;
}

void write_png(const Image & image, const std::filesystem::path & path, int compression_level)
{
  if (image.bands != 1 && image.bands != 3) {
    throw Error(ErrorKind::IoFailure, "PNG writer supports 1 or 3 bands");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorKind::IoFailure, "libpng allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoFailure, "libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, compression_level);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
    image.bands == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
    PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.row(y).data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageFormat format_for(const std::filesystem::path & path)
{
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    return ImageFormat::Png;
  }
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    return ImageFormat::Ppm;
  }
  throw Error(ErrorKind::IoFailure, "unsupported raster extension: " + path.string());
}

ImageInfo probe_image(const std::filesystem::path & path)
{
  if (format_for(path) == ImageFormat::Ppm) {
    const auto h = read_ppm_header(path);
    return {h.width, h.height, h.bands};
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error(ErrorKind::IoFailure, "cannot read PNG " + path.string() + ": " + png.message);
  }
  const ImageInfo info{static_cast<int>(png.width), static_cast<int>(png.height),
    (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1};
  png_image_free(&png);
  return info;
}

Image read_image(const std::filesystem::path & path)
{
  return format_for(path) == ImageFormat::Png ? read_png(path) : read_ppm(path);
}

void write_image(const Image & image, const std::filesystem::path & path)
{
  if (format_for(path) == ImageFormat::Png) {
    write_png(image, path);
  } else {
    write_ppm(image, path);
  }
}

}  // namespace orthopipe
