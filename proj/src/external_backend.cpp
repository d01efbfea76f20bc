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

#include "orthopipe/external_backend.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cmath>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "orthopipe/error.hpp"

extern char ** environ;

namespace orthopipe
{
namespace
{

using nlohmann::json;

constexpr std::size_t kMaxLineBytes = 256u << 20;

[[noreturn]] void violation(const std::string & what)
{
  throw Error(ErrorKind::ProtocolViolation, what);
}

json parse_object(std::string_view line, std::uint64_t expected_id)
{
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    violation("response is not a JSON object");
  }
  const auto id = j.find("id");
  if (id == j.end() || !id->is_number_integer() || id->get<std::int64_t>() < 0 ||
    id->get<std::uint64_t>() != expected_id)
  {
    violation("response id does not match request " + std::to_string(expected_id));
  }
  if (const auto err = j.find("error"); err != j.end()) {
    throw Error(ErrorKind::BackendUnavailable,
      "backend error: " + (err->is_string() ? err->get<std::string>() : err->dump()));
  }
  return j;
}

double number(const json & v, const char * what)
{
  if (!v.is_number()) {
    violation(std::string(what) + " is not a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    violation(std::string(what) + " is not finite");
  }
  return d;
}

Box parse_box(const json & v, int w, int h)
{
  if (!v.is_array() || v.size() != 4) {
    violation("bbox must be an array of 4 numbers");
  }
  const Box b{number(v[0], "bbox"), number(v[1], "bbox"), number(v[2], "bbox"), number(v[3], "bbox")};
  if (!b.valid()) {
    violation("bbox has x2 <= x1 or y2 <= y1");
  }
  if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > w || b.y2 > h) {
    violation("bbox lies outside the tile");
  }
  return b;
}

void write_all(int fd, std::string_view data)
{
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw Error(ErrorKind::BackendUnavailable, "backend closed its input");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

struct RemoveOnExit
{
  std::filesystem::path path;
  ~RemoveOnExit()
  {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

std::filesystem::path make_scratch_dir()
{
  static std::atomic<unsigned> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
    ("orthopipe-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

std::string make_detect_request(std::uint64_t id, const std::filesystem::path & image, int w, int h)
{
  json j = {{"id", id}, {"op", "detect"}, {"image", image.string()}, {"w", w}, {"h", h}};
  return j.dump();
}

std::string make_segment_request(std::uint64_t id, const std::filesystem::path & image, int w, int h,
  std::span<const Box> boxes)
{
  json arr = json::array();
  for (const auto & b : boxes) {
    arr.push_back({b.x1, b.y1, b.x2, b.y2});
  }
  json j = {{"id", id}, {"op", "segment"}, {"image", image.string()}, {"w", w}, {"h", h}, {"boxes", arr}};
  return j.dump();
}

std::vector<Detection> parse_detect_response(std::string_view line, std::uint64_t expected_id, int w, int h)
{
  try {
    const json j = parse_object(line, expected_id);
    const auto dets = j.find("detections");
    if (dets == j.end() || !dets->is_array()) {
      violation("response lacks a detections array");
    }
    std::vector<Detection> out;
    out.reserve(dets->size());
    for (const auto & d : *dets) {
      if (!d.is_object() || !d.contains("bbox") || !d.contains("score")) {
        violation("detection must have bbox and score");
      }
      const double score = number(d["score"], "score");
      if (score < 0.0 || score > 1.0) {
        violation("score outside [0,1]");
      }
      out.push_back({parse_box(d["bbox"], w, h), score, std::nullopt});
    }
    return out;
  } catch (const json::exception & e) {
    violation(e.what());
  }
}

std::vector<MaskRLE> parse_segment_response(std::string_view line, std::uint64_t expected_id, int w, int h,
  std::size_t expected_masks)
{
  try {
    const json j = parse_object(line, expected_id);
    const auto masks = j.find("masks");
    if (masks == j.end() || !masks->is_array() || masks->size() != expected_masks) {
      violation("response must carry one mask per box");
    }
    std::vector<MaskRLE> out;
    for (const auto & m : *masks) {
      if (!m.is_object() || !m.contains("w") || !m.contains("h") || !m.contains("counts") ||
        !m["w"].is_number_integer() || !m["h"].is_number_integer() || !m["counts"].is_array())
      {
        violation("mask must have integer w, h and a counts array");
      }
      MaskRLE rle{m["w"].get<int>(), m["h"].get<int>(), {}};
      if (rle.w != w || rle.h != h) {
        violation("mask dims differ from the tile");
      }
      for (const auto & c : m["counts"]) {
        if (!c.is_number_integer()) {
          violation("mask counts must be integers");
        }
        rle.counts.push_back(c.get<std::int64_t>());
      }
      try {
        (void)rle_decode(rle);
      } catch (const Error & e) {
        violation(e.what());
      }
      out.push_back(std::move(rle));
    }
    return out;
  } catch (const json::exception & e) {
    violation(e.what());
  }
}

Subprocess::Subprocess(const std::string & command)
{
  // A backend that dies mid-write must surface as an error, not kill us.
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw Error(ErrorKind::BackendUnavailable, "pipe() failed");
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorKind::BackendUnavailable, "pipe() failed");
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  std::string cmd = command;
  char * argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw Error(ErrorKind::BackendUnavailable, "cannot launch backend: " + command);
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

Subprocess::~Subprocess()
{
  if (to_child_ >= 0) {
    ::close(to_child_);
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
  }
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

void Subprocess::write_line(std::string_view line)
{
  std::string data(line);
  data.push_back('\n');
  write_all(to_child_, data);
}

std::string Subprocess::read_line(std::chrono::milliseconds timeout)
{
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (buffer_.size() > kMaxLineBytes) {
      violation("response line exceeds size limit");
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw Error(ErrorKind::Timeout, "no response within " + std::to_string(timeout.count()) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) {
      continue;
    }
    if (ready == 0) {
      continue;
    }
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) {
      continue;
    }
    if (n <= 0) {
      throw Error(ErrorKind::BackendUnavailable, "backend exited or closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ExternalBackend::ExternalBackend(ExternalBackendOptions options)
: options_(std::move(options)), process_(options_.command)
{
  if (options_.scratch_dir.empty()) {
    scratch_ = make_scratch_dir();
    owns_scratch_ = true;
  } else {
    scratch_ = options_.scratch_dir;
    std::filesystem::create_directories(scratch_);
  }
}

ExternalBackend::~ExternalBackend()
{
  if (owns_scratch_) {
    std::error_code ec;
    std::filesystem::remove_all(scratch_, ec);
  }
}

std::filesystem::path ExternalBackend::stage_tile(const TileWindow & tile, const Image & pixels)
{
  const char * ext = options_.tile_format == ImageFormat::Png ? ".png" : ".ppm";
  auto path = scratch_ / ("tile_" + std::to_string(tile.index) + "_" + std::to_string(next_id_) + ext);
  write_image(pixels, path);
  return path;
}

TilePrediction ExternalBackend::detect(const TileWindow & tile, const Image & pixels)
{
  const std::uint64_t id = next_id_;
  const RemoveOnExit staged{stage_tile(tile, pixels)};
  ++next_id_;
  process_.write_line(make_detect_request(id, staged.path, pixels.width, pixels.height));
  const std::string line = process_.read_line(options_.timeout);
  return {tile, parse_detect_response(line, id, pixels.width, pixels.height)};
}

std::vector<MaskRLE> ExternalBackend::segment(const TileWindow & tile, const Image & pixels,
  std::span<const Box> boxes)
{
  if (boxes.empty()) {
    return {};
  }
  const std::uint64_t id = next_id_;
  const RemoveOnExit staged{stage_tile(tile, pixels)};
  ++next_id_;
  process_.write_line(make_segment_request(id, staged.path, pixels.width, pixels.height, boxes));
  const std::string line = process_.read_line(options_.timeout);
  return parse_segment_response(line, id, pixels.width, pixels.height, boxes.size());
}

}  // namespace orthopipe
