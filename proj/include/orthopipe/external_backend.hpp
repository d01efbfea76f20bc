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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "orthopipe/backend.hpp"

namespace orthopipe
{

// Newline-delimited JSON protocol spoken with an external model process over
// its stdin/stdout. Tiles travel as temporary image files.
//
//   -> {"id":1,"op":"detect","image":"/tmp/t1.png","w":800,"h":800}
//   <- {"id":1,"detections":[{"bbox":[x1,y1,x2,y2],"score":0.93}]}
//   -> {"id":2,"op":"segment","image":...,"w":...,"h":...,"boxes":[[x1,y1,x2,y2],...]}
//   <- {"id":2,"masks":[{"w":...,"h":...,"counts":[...]}]}
//   <- {"id":n,"error":"message"}

std::string make_detect_request(std::uint64_t id, const std::filesystem::path & image, int w, int h);
std::string make_segment_request(std::uint64_t id, const std::filesystem::path & image, int w, int h,
  std::span<const Box> boxes);

/// Validates one response line. Throws ProtocolViolation for malformed JSON,
/// a mismatched id, or boxes/scores outside the tile; BackendUnavailable when
/// the backend answers with an error object.
std::vector<Detection> parse_detect_response(std::string_view line, std::uint64_t expected_id, int w, int h);
std::vector<MaskRLE> parse_segment_response(std::string_view line, std::uint64_t expected_id, int w, int h,
  std::size_t expected_masks);

/// Child process running `/bin/sh -c command` with piped stdin/stdout.
class Subprocess
{
public:
  explicit Subprocess(const std::string & command);
  ~Subprocess();
  Subprocess(const Subprocess &) = delete;
  Subprocess & operator=(const Subprocess &) = delete;

  void write_line(std::string_view line);
  /// Throws Timeout when no full line arrives in time, BackendUnavailable on EOF.
  std::string read_line(std::chrono::milliseconds timeout);

private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

struct ExternalBackendOptions
{
  std::string command;
  std::chrono::milliseconds timeout{30000};
  ImageFormat tile_format = ImageFormat::Png;
  /// Defaults to a fresh directory under the system temp dir.
  std::filesystem::path scratch_dir;
};

/// One client handle per worker; not safe for concurrent use.
class ExternalBackend final : public DetectorBackend, public SegmenterBackend
{
public:
  explicit ExternalBackend(ExternalBackendOptions options);
  ~ExternalBackend() override;

  TilePrediction detect(const TileWindow & tile, const Image & pixels) override;
  std::vector<MaskRLE> segment(const TileWindow & tile, const Image & pixels,
    std::span<const Box> boxes) override;

private:
  std::filesystem::path stage_tile(const TileWindow & tile, const Image & pixels);

  ExternalBackendOptions options_;
  Subprocess process_;
  std::filesystem::path scratch_;
  bool owns_scratch_ = false;
  std::uint64_t next_id_ = 1;
};

}  // namespace orthopipe
