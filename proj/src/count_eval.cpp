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

#include "orthopipe/count_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

using nlohmann::json;

std::uint64_t cell_key(std::int64_t cx, std::int64_t cy)
{
  return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint64_t>(cy & 0xffffffff);
}

json optional_number(const std::optional<double> & v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json & j, const char * key)
{
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    return std::nullopt;
  }
  return it->get<double>();
}

std::string fmt(double v, const char * spec = "%.17g")
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

json directional_json(const DirectionalMatch & m, const CumulativeCurve & c)
{
  json matches = json::array();
  for (const auto & pm : m.matches) {
    matches.push_back({{"src", pm.src}, {"dst", pm.dst}, {"distance_m", pm.distance}});
  }
  return {{"ratio", m.ratio}, {"median_m", optional_number(m.median_m)}, {"matched", m.matches.size()},
    {"source_count", m.source_count}, {"p90_m", optional_number(c.p90_m)}, {"matches", matches}};
}

}  // namespace

void MatchConfig::validate() const
{
  if (!(radius_m > 0.0) || !std::isfinite(radius_m)) {
    throw Error(ErrorKind::InvalidConfig, "match radius must be positive");
  }
}

PointGrid::PointGrid(std::span<const WorldPoint> points, double cell_size)
: points_(points.begin(), points.end()), cell_(cell_size > 0.0 ? cell_size : 1.0)
{
  for (std::size_t i = 0; i < points_.size(); ++i) {
    cells_[cell_key(cell_index(points_[i].x), cell_index(points_[i].y))].push_back(i);
  }
}

std::int64_t PointGrid::cell_index(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

std::vector<std::size_t> PointGrid::within(WorldPoint q, double radius) const
{
  std::vector<std::size_t> out;
  if (points_.empty() || radius < 0.0) {
    return out;
  }
  const auto x0 = cell_index(q.x - radius);
  const auto x1 = cell_index(q.x + radius);
  const auto y0 = cell_index(q.y - radius);
  const auto y1 = cell_index(q.y + radius);
  const double r2 = radius * radius;
  for (auto cy = y0; cy <= y1; ++cy) {
    for (auto cx = x0; cx <= x1; ++cx) {
      const auto it = cells_.find(cell_key(cx, cy));
      if (it == cells_.end()) {
        continue;
      }
      for (std::size_t i : it->second) {
        const double dx = points_[i].x - q.x;
        const double dy = points_[i].y - q.y;
        if (dx * dx + dy * dy <= r2) {
          out.push_back(i);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> median(std::vector<double> values)
{
  if (values.empty()) {
    return std::nullopt;
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DirectionalMatch match_directional(std::span<const WorldPoint> src, std::span<const WorldPoint> dst,
  const MatchConfig & cfg)
{
  cfg.validate();
  DirectionalMatch result;
  result.source_count = src.size();
  if (src.empty()) {
    return result;
  }

  const PointGrid index(dst, cfg.radius_m);
  std::vector<PointMatch> candidates;
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j : index.within(src[i], cfg.radius_m * (1.0 + 1e-12))) {
      const double d = std::hypot(src[i].x - dst[j].x, src[i].y - dst[j].y);
      if (d <= cfg.radius_m) {
        candidates.push_back({i, j, d});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const PointMatch & a, const PointMatch & b) {
    if (a.distance != b.distance) {
      return a.distance < b.distance;
    }
    if (a.src != b.src) {
      return a.src < b.src;
    }
    return a.dst < b.dst;
  });

  std::vector<bool> src_used(src.size(), false);
  std::vector<bool> dst_used(dst.size(), false);
  for (const auto & c : candidates) {
    if (src_used[c.src] || (!cfg.allow_many_to_one && dst_used[c.dst])) {
      continue;
    }
    src_used[c.src] = true;
    dst_used[c.dst] = true;
    result.matches.push_back(c);
  }

  std::vector<double> distances;
  distances.reserve(result.matches.size());
  for (const auto & m : result.matches) {
    distances.push_back(m.distance);
  }
  result.ratio = static_cast<double>(result.matches.size()) / static_cast<double>(src.size());
  result.median_m = median(std::move(distances));
  return result;
}

CumulativeCurve cumulative_shifts(const DirectionalMatch & m)
{
  CumulativeCurve curve;
  for (const auto & pm : m.matches) {
    curve.distances.push_back(pm.distance);
  }
  std::sort(curve.distances.begin(), curve.distances.end());
  const double n = static_cast<double>(curve.distances.size());
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    curve.fractions.push_back(static_cast<double>(i + 1) / n);
  }
  if (!curve.distances.empty()) {
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * n - 1e-9));
    curve.p90_m = curve.distances[std::max<std::size_t>(rank, 1) - 1];
  }
  return curve;
}

MatchReport evaluate(std::span<const WorldPoint> preds, std::span<const WorldPoint> gts, const MatchConfig & cfg)
{
  if (gts.empty()) {
    throw Error(ErrorKind::EmptyGroundTruth, "ground truth has no points");
  }
  MatchReport r;
  r.config = cfg;
  r.pred_count = preds.size();
  r.gt_count = gts.size();
  r.pred2gt = match_directional(preds, gts, cfg);
  r.gt2pred = match_directional(gts, preds, cfg);
  r.pred2gt_curve = cumulative_shifts(r.pred2gt);
  r.gt2pred_curve = cumulative_shifts(r.gt2pred);
  return r;
}

CountingRow counting_row(const MatchReport & report, std::string site, std::optional<double> area_ha)
{
  return {std::move(site), area_ha, report.gt_count, report.pred2gt.ratio, report.pred2gt.median_m,
    report.gt2pred.ratio, report.gt2pred.median_m};
}

std::string counting_row_csv(const CountingRow & row)
{
  const auto opt = [](const std::optional<double> & v, const char * spec) { return v ? fmt(*v, spec) : ""; };
  std::string site = row.site;
  if (site.find_first_of(",\"") != std::string::npos) {
    std::string quoted = "\"";
    for (char ch : site) {
      quoted += ch == '"' ? "\"\"" : std::string(1, ch);
    }
    site = quoted + "\"";
  }
  return site + "," + opt(row.area_ha, "%.2f") + "," + std::to_string(row.counts) + "," +
    fmt(row.pred2gt_ratio, "%.4f") + "," + opt(row.pred2gt_median_m, "%.2f") + "," +
    fmt(row.gt2pred_ratio, "%.4f") + "," + opt(row.gt2pred_median_m, "%.2f");
}

std::string counting_row_to_json(const CountingRow & row)
{
  const json j = {{"site", row.site}, {"area_ha", optional_number(row.area_ha)}, {"counts", row.counts},
    {"pred2gt_ratio", row.pred2gt_ratio}, {"pred2gt_median_m", optional_number(row.pred2gt_median_m)},
    {"gt2pred_ratio", row.gt2pred_ratio}, {"gt2pred_median_m", optional_number(row.gt2pred_median_m)}};
  return j.dump();
}

CountingRow counting_row_from_json(std::string_view text)
{
  try {
    const json j = json::parse(text);
    return {j.at("site").get<std::string>(), read_optional(j, "area_ha"), j.at("counts").get<std::size_t>(),
      j.at("pred2gt_ratio").get<double>(), read_optional(j, "pred2gt_median_m"),
      j.at("gt2pred_ratio").get<double>(), read_optional(j, "gt2pred_median_m")};
  } catch (const json::exception & e) {
    throw Error(ErrorKind::IoFailure, std::string("bad counting row JSON: ") + e.what());
  }
}

std::string report_to_json(const MatchReport & report, const CountingRow & row, const MatchReport * alternate)
{
  json j = {
    {"table", json::parse(counting_row_to_json(row))},
    {"matching", report.config.allow_many_to_one ? "many-to-one" : "one-to-one"},
    {"radius_m", report.config.radius_m},
    {"pred_count", report.pred_count},
    {"gt_count", report.gt_count},
    {"pred2gt", directional_json(report.pred2gt, report.pred2gt_curve)},
    {"gt2pred", directional_json(report.gt2pred, report.gt2pred_curve)},
  };
  if (alternate != nullptr) {
    j["alternate"] = {
      {"matching", alternate->config.allow_many_to_one ? "many-to-one" : "one-to-one"},
      {"pred2gt_ratio", alternate->pred2gt.ratio},
      {"pred2gt_median_m", optional_number(alternate->pred2gt.median_m)},
      {"gt2pred_ratio", alternate->gt2pred.ratio},
      {"gt2pred_median_m", optional_number(alternate->gt2pred.median_m)},
    };
  }
  return j.dump(2);
}

std::string cumulative_csv(const MatchReport & report)
{
  std::ostringstream out;
  out << "direction,distance_m,fraction\n";
  const auto emit = [&](const char * name, const CumulativeCurve & c) {
    for (std::size_t i = 0; i < c.distances.size(); ++i) {
      out << name << ',' << fmt(c.distances[i]) << ',' << fmt(c.fractions[i]) << '\n';
    }
  };
  emit("pred2gt", report.pred2gt_curve);
  emit("gt2pred", report.gt2pred_curve);
  return out.str();
}

std::string cumulative_svg(const MatchReport & report)
{
  constexpr double kW = 480.0;
  constexpr double kH = 320.0;
  constexpr double kPad = 40.0;
  const double x_max = report.config.radius_m;
  const auto px = [&](double d) { return kPad + (kW - 2 * kPad) * std::min(d, x_max) / x_max; };
  const auto py = [&](double f) { return kH - kPad - (kH - 2 * kPad) * f; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << py(0) << "\" x2=\"" << kW - kPad << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << py(0) << "\" x2=\"" << kPad << "\" y2=\"" << py(1)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << py(0.9) << "\" x2=\"" << kW - kPad << "\" y2=\"" << py(0.9)
      << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  const auto curve = [&](const CumulativeCurve & c, const char * color, const char * label) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << px(0) << ',' << py(0);
    double prev = 0.0;
    for (std::size_t i = 0; i < c.distances.size(); ++i) {
      svg << ' ' << px(c.distances[i]) << ',' << py(prev) << ' ' << px(c.distances[i]) << ',' << py(c.fractions[i]);
      prev = c.fractions[i];
    }
    svg << "\"><title>" << label << "</title></polyline>\n";
  };
  curve(report.pred2gt_curve, "#1f77b4", "Pred2GT");
  curve(report.gt2pred_curve, "#d62728", "GT2Pred");
  svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\" font-size=\"12\">shift (m)</text>\n";
  svg << "<text x=\"" << kW - kPad << "\" y=\"" << py(0.9) - 4 << "\" text-anchor=\"end\" font-size=\"11\">90%</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace orthopipe
