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

// Scriptable stand-in for an external detector/segmenter speaking the NDJSON protocol.
// Usage: fake_backend <mode>
//   echo      one fixed detection per tile, ellipse-free segment masks
//   reads     like echo but fails unless the staged tile image exists
//   badbox    detection with x2 <= x1
//   wrongid   answers with id + 1
//   garbage   random bytes instead of JSON
//   error     {"error": ...} responses
//   sleep     never answers
//   exit      exits without answering

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <thread>

#include "json.hpp"

using nlohmann::json;

int main(int argc, char ** argv)
{
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::mt19937_64 rng(7);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "exit") {
      return 0;
    }
    if (mode == "sleep") {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      return 0;
    }
    const json req = json::parse(line);
    const std::uint64_t id = req.at("id").get<std::uint64_t>();
    const int w = req.at("w").get<int>();
    const int h = req.at("h").get<int>();
    json resp;
    if (mode == "garbage") {
      std::string noise;
      for (int i = 0; i < 64; ++i) {
        char c = static_cast<char>(rng() & 0xff);
        noise.push_back(c == '\n' ? ' ' : c);
      }
      std::cout << noise << std::endl;
      continue;
    }
    if (mode == "error") {
      resp = {{"id", id}, {"error", "model not loaded"}};
    } else if (req.at("op") == "segment") {
      json masks = json::array();
      for (std::size_t i = 0; i < req.at("boxes").size(); ++i) {
        masks.push_back({{"w", w}, {"h", h}, {"counts", {static_cast<std::int64_t>(w) * h}}});
      }
      resp = {{"id", id}, {"masks", masks}};
    } else {
      if (mode == "reads" && !std::filesystem::exists(req.at("image").get<std::string>())) {
        resp = {{"id", id}, {"error", "missing tile image"}};
      } else {
        const double x2 = std::min(110, w);
        const double y2 = std::min(140, h);
        json box = mode == "badbox" ? json{50, 20, 40, 140} : json{10, 20, x2, y2};
        resp = {{"id", mode == "wrongid" ? id + 1 : id}, {"detections", {{{"bbox", box}, {"score", 0.93}}}}};
      }
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
