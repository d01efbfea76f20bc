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

#include "orthopipe/formats.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

using nlohmann::json;

std::string fmt17(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line)
{
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  for (auto & f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return fields;
}

bool is_geojson(const std::filesystem::path & path)
{
  const auto ext = path.extension().string();
  return ext == ".geojson" || ext == ".json" || ext == ".GEOJSON" || ext == ".JSON";
}

}  // namespace

std::string read_text(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path & path, std::string_view text)
{
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  }
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const
{
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const
{
  if (const auto c = find_column(name)) {
    return *c;
  }
  throw Error(ErrorKind::IoFailure, source.string() + ": missing CSV column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const
{
  const auto & r = rows.at(row);
  if (col >= r.size()) {
    throw Error(ErrorKind::IoFailure, source.string() + ": row " + std::to_string(row + 2) + " is short");
  }
  const std::string & cell = r[col];
  double v = 0.0;
  const char * first = cell.data();
  if (!cell.empty() && cell.front() == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::IoFailure,
      source.string() + ": row " + std::to_string(row + 2) + " has non-numeric '" + cell + "'");
  }
  return v;
}

CsvTable parse_csv(std::string_view text, const std::filesystem::path & source)
{
  CsvTable table;
  table.source = source;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      nl = text.size();
    }
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      continue;
    }
    auto fields = split_csv_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) {
    throw Error(ErrorKind::IoFailure, source.string() + ": empty CSV");
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path & path) { return parse_csv(read_text(path), path); }

std::string points_to_geojson(std::span<const WorldPoint> points, std::span<const double> scores)
{
  json features = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    json props = json::object();
    if (i < scores.size()) {
      props["score"] = scores[i];
    }
    features.push_back({{"type", "Feature"},
      {"geometry", {{"type", "Point"}, {"coordinates", {points[i].x, points[i].y}}}}, {"properties", props}});
  }
  // Coordinates are the raster's projected CRS, passed through untouched.
  const json fc = {{"type", "FeatureCollection"}, {"crs_note", "raster CRS (opaque)"}, {"features", features}};
  return fc.dump() + "\n";
}

std::vector<WorldPoint> read_points(const std::filesystem::path & path)
{
  std::vector<WorldPoint> points;
  if (is_geojson(path)) {
    const std::string text = read_text(path);
    try {
      const json j = json::parse(text);
      for (const auto & f : j.at("features")) {
        const auto & g = f.at("geometry");
        if (g.at("type").get<std::string>() != "Point") {
          throw Error(ErrorKind::IoFailure, path.string() + ": only Point features are supported");
        }
        const auto & c = g.at("coordinates");
        points.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      }
    } catch (const json::exception & e) {
      throw Error(ErrorKind::IoFailure, path.string() + ": bad GeoJSON: " + e.what());
    }
    return points;
  }
  const CsvTable table = read_csv(path);
  const std::size_t cx = table.column("x");
  const std::size_t cy = table.column("y");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    points.push_back({table.number(i, cx), table.number(i, cy)});
  }
  return points;
}

std::string pairs_to_csv(std::span<const CalibrationPair> pairs)
{
  std::string out = "score,iou\n";
  for (const auto & p : pairs) {
    out += fmt17(p.score) + "," + fmt17(p.iou) + "\n";
  }
  return out;
}

std::vector<CalibrationPair> read_pairs(const std::filesystem::path & path)
{
  const CsvTable table = read_csv(path);
  const std::size_t cs = table.column("score");
  const std::size_t ci = table.column("iou");
  std::vector<CalibrationPair> pairs;
  pairs.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const CalibrationPair p{table.number(i, cs), table.number(i, ci)};
    if (p.score < 0.0 || p.score > 1.0 || p.iou < 0.0 || p.iou > 1.0) {
      throw Error(ErrorKind::IoFailure, path.string() + ": row " + std::to_string(i + 2) + " outside [0,1]");
    }
    pairs.push_back(p);
  }
  return pairs;
}

std::string detections_to_json(std::span<const GlobalDetection> dets)
{
  json arr = json::array();
  for (const auto & d : dets) {
    arr.push_back({{"bbox", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}, {"score", d.score},
      {"calibrated_score", d.calibrated_score ? json(*d.calibrated_score) : json(nullptr)},
      {"source_tile", d.source_tile}});
  }
  return json{{"detections", arr}}.dump() + "\n";
}

std::vector<GlobalDetection> detections_from_json(std::string_view text)
{
  std::vector<GlobalDetection> out;
  try {
    const json j = json::parse(text);
    for (const auto & d : j.at("detections")) {
      const auto & b = d.at("bbox");
      GlobalDetection g;
      g.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      g.score = d.at("score").get<double>();
      if (d.contains("calibrated_score") && !d["calibrated_score"].is_null()) {
        g.calibrated_score = d["calibrated_score"].get<double>();
      }
      g.source_tile = d.value("source_tile", 0);
      if (!g.box.valid()) {
        throw Error(ErrorKind::IoFailure, "detection box with x2 <= x1 or y2 <= y1");
      }
      out.push_back(g);
    }
  } catch (const json::exception & e) {
    throw Error(ErrorKind::IoFailure, std::string("bad detections JSON: ") + e.what());
  }
  return out;
}

std::string centers_to_csv(std::span<const GeoPoint> points)
{
  std::string out = "x,y,score\n";
  for (const auto & p : points) {
    out += fmt17(p.x) + "," + fmt17(p.y) + "," + fmt17(p.score) + "\n";
  }
  return out;
}

}  // namespace orthopipe
