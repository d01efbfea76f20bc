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

#include "orthopipe/pipeline.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "orthopipe/error.hpp"
#include "orthopipe/formats.hpp"

namespace orthopipe
{
namespace
{

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string crc32_of_file(const std::filesystem::path & path, std::uint64_t & bytes)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  }
  uLong crc = crc32(0L, Z_NULL, 0);
  std::vector<char> buf(1 << 20);
  bytes = 0;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = in.gcount();
    if (n > 0) {
      crc = crc32(crc, reinterpret_cast<const Bytef *>(buf.data()), static_cast<uInt>(n));
      bytes += static_cast<std::uint64_t>(n);
    }
  }
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08lx", static_cast<unsigned long>(crc));
  return hex;
}

std::filesystem::path default_truth_path(const std::filesystem::path & raster)
{
  return raster.parent_path() / (raster.stem().string() + ".truth.csv");
}

std::filesystem::path resolve_worldfile(const std::filesystem::path & raster, const std::filesystem::path & given)
{
  if (!given.empty()) {
    return given;
  }
  const auto conventional = worldfile_path_for(raster);
  if (std::filesystem::exists(conventional)) {
    return conventional;
  }
  for (const char * ext : {".wld", ".tfw", ".pgw"}) {
    auto candidate = raster;
    candidate.replace_extension(ext);
    if (std::filesystem::exists(candidate)) {
      return candidate;
    }
  }
  return conventional;
}

json backend_json(const BackendSpec & spec)
{
  if (!spec.oracle) {
    return {{"kind", "external"}, {"command", spec.command}, {"timeout_ms", spec.timeout.count()}};
  }
  const auto & n = spec.noise;
  return {{"kind", "oracle"}, {"truth", spec.truth_csv.string()}, {"drop_rate", n.drop_rate},
    {"spurious_rate", n.spurious_rate}, {"center_jitter_sigma", n.center_jitter_sigma},
    {"score_bias", n.score_law.bias}, {"score_sigma", n.score_law.sigma}, {"seed", n.seed},
    {"min_visible_fraction", n.min_visible_fraction}};
}

json config_json(const PipelineConfig & cfg)
{
  json j = {{"tile", cfg.tiling.tile}, {"stride", cfg.tiling.stride}, {"nms_iou", cfg.nms_iou},
    {"backend", backend_json(cfg.backend)}, {"workers", cfg.workers}};
  j["calib"] = cfg.calibration_model ? json(cfg.calibration_model->string()) : json(nullptr);
  j["threshold"] = cfg.threshold ? json(*cfg.threshold) : json(nullptr);
  return j;
}

std::shared_ptr<OracleBackend> make_oracle(const BackendSpec & spec, const std::filesystem::path & raster,
  int width, int height, const GeoTransform & transform)
{
  std::vector<TruthObject> truth;
  const auto path = spec.truth_csv.empty() ? default_truth_path(raster) : spec.truth_csv;
  if (!path.empty() && std::filesystem::exists(path)) {
    truth = truth_objects(read_truth_csv(path, width, height, transform));
  } else if (!spec.truth_csv.empty()) {
    throw Error(ErrorKind::IoFailure, "oracle truth not found: " + path.string());
  }
  return std::make_shared<OracleBackend>(std::move(truth), spec.noise);
}

bool contains(const TileWindow & t, const Box & b)
{
  return b.x1 >= t.x0 && b.y1 >= t.y0 && b.x2 <= t.x0 + t.w && b.y2 <= t.y0 + t.h;
}

TileWindow window_around(const Box & b, int tile, int width, int height)
{
  const auto axis = [tile](double lo, double hi, int extent) {
    const int size = std::min(extent, std::max(tile, static_cast<int>(std::ceil(hi) - std::floor(lo))));
    int start = static_cast<int>(std::floor(0.5 * (lo + hi) - 0.5 * size));
    start = std::clamp(start, 0, extent - size);
    return std::pair{start, size};
  };
  const auto [x0, w] = axis(b.x1, b.x2, width);
  const auto [y0, h] = axis(b.y1, b.y2, height);
  return {x0, y0, w, h, -1};
}

std::string pct(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

BackendSpec BackendSpec::parse(std::string_view text)
{
  BackendSpec spec;
  if (text == "oracle") {
    return spec;
  }
  if (text.empty()) {
    throw Error(ErrorKind::InvalidConfig, "backend must be 'oracle' or a command");
  }
  spec.oracle = false;
  spec.command = std::string(text);
  return spec;
}

void PipelineConfig::validate() const
{
  tiling.validate();
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "nms_iou must be in (0, 1]");
  }
  if (workers < 1) {
    throw Error(ErrorKind::InvalidConfig, "workers must be >= 1");
  }
  if (threshold && (*threshold < 0.0 || *threshold > 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "threshold must be in [0, 1]");
  }
  backend.noise.validate();
}

void apply_config_json(PipelineConfig & cfg, std::string_view json_text)
{
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::InvalidConfig, "config file is not a JSON object");
  }
  try {
    for (const auto & [key, v] : j.items()) {
      if (key == "raster") {
        cfg.raster = v.get<std::string>();
      } else if (key == "worldfile") {
        cfg.worldfile = v.get<std::string>();
      } else if (key == "tile") {
        cfg.tiling.tile = v.get<int>();
      } else if (key == "stride") {
        cfg.tiling.stride = v.get<int>();
      } else if (key == "nms_iou") {
        cfg.nms_iou = v.get<double>();
      } else if (key == "backend") {
        const auto keep = cfg.backend;
        cfg.backend = BackendSpec::parse(v.get<std::string>());
        cfg.backend.truth_csv = keep.truth_csv;
        cfg.backend.noise = keep.noise;
        cfg.backend.timeout = keep.timeout;
      } else if (key == "workers") {
        cfg.workers = v.get<int>();
      } else if (key == "calib") {
        if (v.is_null()) {
          cfg.calibration_model.reset();
        } else {
          cfg.calibration_model = v.get<std::string>();
        }
      } else if (key == "threshold") {
        if (v.is_null()) {
          cfg.threshold.reset();
        } else {
          cfg.threshold = v.get<double>();
        }
      } else if (key == "out_dir") {
        cfg.out_dir = v.get<std::string>();
      } else if (key == "truth") {
        cfg.backend.truth_csv = v.get<std::string>();
      } else if (key == "timeout_ms") {
        cfg.backend.timeout = std::chrono::milliseconds(v.get<std::int64_t>());
      } else if (key == "oracle") {
        auto & n = cfg.backend.noise;
        n.drop_rate = v.value("drop_rate", n.drop_rate);
        n.spurious_rate = v.value("spurious_rate", n.spurious_rate);
        n.center_jitter_sigma = v.value("center_jitter_sigma", n.center_jitter_sigma);
        n.score_law.bias = v.value("score_bias", n.score_law.bias);
        n.score_law.sigma = v.value("score_sigma", n.score_law.sigma);
        n.seed = v.value("seed", n.seed);
        n.min_visible_fraction = v.value("min_visible_fraction", n.min_visible_fraction);
      } else {
        throw Error(ErrorKind::InvalidConfig, "unknown config key: " + key);
      }
    }
  } catch (const json::exception & e) {
    throw Error(ErrorKind::InvalidConfig, std::string("bad config value: ") + e.what());
  }
}

std::string RunManifest::to_json() const
{
  json stage_list = json::array();
  for (const auto & s : stages) {
    stage_list.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  }
  const json j = {
    {"tool_version", tool_version},
    {"raster", {{"path", raster_path}, {"width", raster_width}, {"height", raster_height},
                 {"bytes", raster_bytes}, {"crc32", raster_crc32}}},
    {"config", config_json.empty() ? json::object() : json::parse(config_json)},
    {"stages", stage_list},
    {"counts", {{"tiles", tiles}, {"raw", raw_detections}, {"after_nms", after_nms},
                 {"after_threshold", after_threshold}}},
  };
  return j.dump(2) + "\n";
}

DetectorFactory make_detector_factory(const BackendSpec & spec, const std::filesystem::path & raster, int width,
  int height, const GeoTransform & transform)
{
  if (spec.oracle) {
    auto oracle = make_oracle(spec, raster, width, height, transform);
    return [oracle]() -> std::shared_ptr<DetectorBackend> { return oracle; };
  }
  ExternalBackendOptions options;
  options.command = spec.command;
  options.timeout = spec.timeout;
  options.tile_format = spec.tile_format;
  return [options]() -> std::shared_ptr<DetectorBackend> { return std::make_shared<ExternalBackend>(options); };
}

DetectResult detect_raster(const RasterSource & raster, const DetectorFactory & factory, const PipelineConfig & cfg)
{
  cfg.validate();
  DetectResult result;
  auto & manifest = result.manifest;
  manifest.raster_width = raster.width();
  manifest.raster_height = raster.height();
  manifest.config_json = config_json(cfg).dump();

  const auto tiles = tile_iter(raster.width(), raster.height(), cfg.tiling);
  manifest.tiles = tiles.size();
  std::vector<TilePrediction> predictions(tiles.size());

  auto t0 = Clock::now();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&]() {
    try {
      auto backend = factory();
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tiles.size() || failed.load()) {
          return;
        }
        const Image pixels = raster.read_window(tiles[i]);
        predictions[i] = backend->detect(tiles[i], pixels);
        predictions[i].tile = tiles[i];
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) {
        error = std::current_exception();
      }
      failed = true;
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), std::max<std::size_t>(1, tiles.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back(worker);
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
  manifest.stages.push_back({"detect", seconds_since(t0)});

  t0 = Clock::now();
  std::vector<GlobalDetection> all;
  for (const auto & p : predictions) {
    auto g = to_global(p, raster.width(), raster.height());
    all.insert(all.end(), g.begin(), g.end());
  }
  manifest.raw_detections = all.size();
  auto kept = nms(std::move(all), cfg.nms_iou);
  manifest.after_nms = kept.size();
  manifest.stages.push_back({"nms", seconds_since(t0)});

  if (cfg.calibration_model) {
    t0 = Clock::now();
    const auto model = model_from_json(read_text(*cfg.calibration_model));
    apply_calibration(model, kept);
    manifest.stages.push_back({"calibrate", seconds_since(t0)});
  }
  if (cfg.threshold) {
    const double t = *cfg.threshold;
    std::erase_if(kept, [t](const GlobalDetection & d) { return d.score < t; });
  }
  manifest.after_threshold = kept.size();

  t0 = Clock::now();
  result.centers = centers_to_geo(kept, raster.transform());
  manifest.stages.push_back({"georeference", seconds_since(t0)});
  result.detections = std::move(kept);
  return result;
}

DetectResult run_detect(const PipelineConfig & cfg)
{
  cfg.validate();
  const auto wf = resolve_worldfile(cfg.raster, cfg.worldfile);
  const GeoTransform transform = read_worldfile(wf);
  const auto raster = open_raster(cfg.raster, transform);
  const auto factory =
    make_detector_factory(cfg.backend, cfg.raster, raster->width(), raster->height(), transform);

  DetectResult result = detect_raster(*raster, factory, cfg);
  result.manifest.raster_path = cfg.raster.string();
  result.manifest.raster_crc32 = crc32_of_file(cfg.raster, result.manifest.raster_bytes);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "boxes.json", detections_to_json(result.detections));
    std::vector<WorldPoint> pts;
    std::vector<double> scores;
    for (const auto & c : result.centers) {
      pts.push_back({c.x, c.y});
      scores.push_back(c.score);
    }
    write_text(cfg.out_dir / "centers.geojson", points_to_geojson(pts, scores));
    write_text(cfg.out_dir / "centers.csv", centers_to_csv(result.centers));
    write_text(cfg.out_dir / "manifest.json", result.manifest.to_json());
  }
  return result;
}

std::vector<SegmentedDetection> segment_detections(const RasterSource & raster,
  std::span<const GlobalDetection> dets, SegmenterBackend & backend, const TilingConfig & tiling)
{
  const auto tiles = tile_iter(raster.width(), raster.height(), tiling);
  using Key = std::tuple<int, int, int, int>;
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto it = std::find_if(tiles.begin(), tiles.end(), [&](const TileWindow & t) { return contains(t, dets[i].box); });
    const TileWindow w = it != tiles.end() ? *it : window_around(dets[i].box, tiling.tile, raster.width(), raster.height());
    groups[{w.y0, w.x0, w.w, w.h}].push_back(i);
  }

  std::vector<SegmentedDetection> out;
  out.reserve(dets.size());
  int index = 0;
  for (const auto & [key, members] : groups) {
    const auto [y0, x0, w, h] = key;
    const TileWindow window{x0, y0, w, h, index++};
    const Image pixels = raster.read_window(window);
    std::vector<Box> local;
    for (std::size_t i : members) {
      local.push_back(dets[i].box.translated(-x0, -y0).clipped(0.0, 0.0, w, h));
    }
    auto masks = backend.segment(window, pixels, local);
    if (masks.size() != members.size()) {
      throw Error(ErrorKind::ProtocolViolation, "segmenter returned a wrong number of masks");
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      out.push_back({members[k], window, std::move(masks[k])});
    }
  }
  std::sort(out.begin(), out.end(),
    [](const SegmentedDetection & a, const SegmentedDetection & b) { return a.detection < b.detection; });
  return out;
}

std::string segments_to_json(std::span<const SegmentedDetection> segs)
{
  json arr = json::array();
  for (const auto & s : segs) {
    arr.push_back({{"detection", s.detection}, {"window", {s.window.x0, s.window.y0, s.window.w, s.window.h}},
      {"w", s.mask.w}, {"h", s.mask.h}, {"counts", s.mask.counts}});
  }
  return json{{"masks", arr}}.dump() + "\n";
}

Image render_overlay(const RasterSource & raster, std::span<const GlobalDetection> dets,
  std::span<const SegmentedDetection> segs)
{
  const Image src = raster.read_window({0, 0, raster.width(), raster.height(), 0});
  Image out(src.width, src.height, 3);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int b = 0; b < 3; ++b) {
        out.at(x, y, b) = src.at(x, y, src.bands == 3 ? b : 0);
      }
    }
  }
  constexpr std::uint8_t tint[3] = {230, 40, 200};
  for (const auto & s : segs) {
    const Mask m = rle_decode(s.mask);
    for (int y = 0; y < m.h; ++y) {
      for (int x = 0; x < m.w; ++x) {
        if (!m.at(x, y)) {
          continue;
        }
        for (int b = 0; b < 3; ++b) {
          auto & v = out.at(s.window.x0 + x, s.window.y0 + y, b);
          v = static_cast<std::uint8_t>((v + tint[b]) / 2);
        }
      }
    }
  }
  const auto plot = [&](int x, int y) {
    if (x >= 0 && y >= 0 && x < out.width && y < out.height) {
      out.at(x, y, 0) = 255;
      out.at(x, y, 1) = 255;
      out.at(x, y, 2) = 0;
    }
  };
  for (const auto & d : dets) {
    const int x1 = static_cast<int>(std::floor(d.box.x1));
    const int y1 = static_cast<int>(std::floor(d.box.y1));
    const int x2 = static_cast<int>(std::ceil(d.box.x2)) - 1;
    const int y2 = static_cast<int>(std::ceil(d.box.y2)) - 1;
    for (int x = x1; x <= x2; ++x) {
      plot(x, y1);
      plot(x, y2);
    }
    for (int y = y1; y <= y2; ++y) {
      plot(x1, y);
      plot(x2, y);
    }
  }
  return out;
}

std::vector<SegmentedDetection> run_segment(const SegmentOptions & opts)
{
  opts.tiling.validate();
  const auto wf = resolve_worldfile(opts.raster, opts.worldfile);
  GeoTransform transform;
  if (std::filesystem::exists(wf)) {
    transform = read_worldfile(wf);
  }
  const auto raster = open_raster(opts.raster, transform);
  const auto dets = detections_from_json(read_text(opts.detections));

  std::shared_ptr<SegmenterBackend> backend;
  if (opts.backend.oracle) {
    backend = std::make_shared<OracleBackend>(std::vector<TruthObject>{}, opts.backend.noise);
  } else {
    ExternalBackendOptions options;
    options.command = opts.backend.command;
    options.timeout = opts.backend.timeout;
    options.tile_format = opts.backend.tile_format;
    backend = std::make_shared<ExternalBackend>(options);
  }
  auto segs = segment_detections(*raster, dets, *backend, opts.tiling);
  if (!opts.masks_out.empty()) {
    write_text(opts.masks_out, segments_to_json(segs));
  }
  if (!opts.overlay_out.empty()) {
    write_image(render_overlay(*raster, dets, segs), opts.overlay_out);
  }
  return segs;
}

std::string CalibrateResult::table() const
{
  std::ostringstream out;
  const auto row = [&](const std::vector<std::string> & cells) {
    out << "| ";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << cells[i] << (i + 1 < cells.size() ? " | " : " |\n");
    }
  };
  std::vector<std::string> header{"Metric", "Model", "Uncalibrated"};
  for (const auto & s : scores) {
    header.emplace_back(s.method == CalibrationMethod::Identity ? "Identity" : method_label(s.method));
  }
  row(header);
  row(std::vector<std::string>(header.size(), "---"));
  std::vector<std::string> ece{"LaECE0", model_name, pct(uncalibrated_laece0)};
  std::vector<std::string> ace{"LaACE0", model_name, pct(uncalibrated_laace0)};
  for (const auto & s : scores) {
    ece.push_back(pct(s.laece0));
    ace.push_back(pct(s.laace0));
  }
  row(ece);
  row(ace);
  return out.str();
}

CalibrateResult calibrate_pairs(std::span<const CalibrationPair> pairs, const CalibrateOptions & opts)
{
  if (opts.bins < 1) {
    throw Error(ErrorKind::InvalidConfig, "bins must be >= 1");
  }
  CalibrateResult result;
  result.model_name = opts.model_name;
  result.pairs_in = pairs.size();
  std::vector<CalibrationPair> used(pairs.begin(), pairs.end());
  if (opts.threshold) {
    const double t = select_threshold(pairs, *opts.threshold);
    result.threshold = t;
    std::erase_if(used, [t](const CalibrationPair & p) { return p.score < t; });
  }
  if (used.empty()) {
    throw Error(ErrorKind::NoDetections, "no pairs left to calibrate");
  }
  result.pairs_used = used.size();
  result.uncalibrated_laece0 = laece0(used, opts.bins);
  result.uncalibrated_laace0 = laace0(used);

  for (const auto method : opts.methods) {
    CalibrationScore s;
    s.method = method;
    s.model = fit(method, used);
    std::vector<CalibrationPair> calibrated;
    calibrated.reserve(used.size());
    for (const auto & p : used) {
      calibrated.push_back({s.model.apply(p.score), p.iou});
    }
    s.laece0 = laece0(calibrated, opts.bins);
    s.laace0 = laace0(calibrated);
    result.scores.push_back(std::move(s));
  }
  return result;
}

CalibrateResult run_calibrate(const CalibrateOptions & opts)
{
  const auto pairs = read_pairs(opts.pairs);
  CalibrateResult result = calibrate_pairs(pairs, opts);
  if (!opts.model_out.empty()) {
    if (result.scores.size() == 1) {
      write_text(opts.model_out, model_to_json(result.scores.front().model) + "\n");
    } else {
      for (const auto & s : result.scores) {
        auto path = opts.model_out;
        path.replace_filename(opts.model_out.stem().string() + "." + std::string(s.model.kind()) + ".json");
        write_text(path, model_to_json(s.model) + "\n");
      }
    }
  }
  return result;
}

EvalCountResult run_eval_count(const EvalCountOptions & opts)
{
  opts.match.validate();
  const auto preds = read_points(opts.pred);
  const auto gts = read_points(opts.gt);

  EvalCountResult r;
  r.report = evaluate(preds, gts, opts.match);
  MatchConfig other = opts.match;
  other.allow_many_to_one = !opts.match.allow_many_to_one;
  r.alternate = evaluate(preds, gts, other);

  std::optional<double> area = opts.area_ha;
  if (!area) {
    const auto [xmin, xmax] = std::minmax_element(gts.begin(), gts.end(),
      [](const WorldPoint & a, const WorldPoint & b) { return a.x < b.x; });
    const auto [ymin, ymax] = std::minmax_element(gts.begin(), gts.end(),
      [](const WorldPoint & a, const WorldPoint & b) { return a.y < b.y; });
    area = (xmax->x - xmin->x) * (ymax->y - ymin->y) / 10000.0;
  }
  r.row = counting_row(r.report, opts.site, area);

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    write_text(opts.out_dir / "report.json", report_to_json(r.report, r.row, &r.alternate) + "\n");
    write_text(opts.out_dir / "report.csv", std::string(kCountingCsvHeader) + "\n" + counting_row_csv(r.row) + "\n");
    write_text(opts.out_dir / "cumulative.csv", cumulative_csv(r.report));
    if (opts.svg) {
      write_text(opts.out_dir / "cumulative.svg", cumulative_svg(r.report));
    }
  }
  return r;
}

StageStats summarize(std::string stage, std::span<const double> seconds)
{
  StageStats s;
  s.stage = std::move(stage);
  s.samples = seconds.size();
  if (seconds.empty()) {
    return s;
  }
  const double n = static_cast<double>(seconds.size());
  s.mean_s = std::accumulate(seconds.begin(), seconds.end(), 0.0) / n;
  if (seconds.size() > 1) {
    double ss = 0.0;
    for (double v : seconds) {
      ss += (v - s.mean_s) * (v - s.mean_s);
    }
    s.std_s = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::string BenchResult::table() const
{
  std::ostringstream out;
  out << "| Device |";
  for (const auto & s : stages) {
    if (s.stage != "read") {
      out << ' ' << (s.stage == "detect" ? "Detection" : "Segmentation") << " (" << backend << ") |";
    }
  }
  out << "\n| --- |";
  for (const auto & s : stages) {
    if (s.stage != "read") {
      out << " --- |";
    }
  }
  out << "\n| " << device << " |";
  char cell[64];
  for (const auto & s : stages) {
    if (s.stage != "read") {
      std::snprintf(cell, sizeof(cell), " %.4g±%.4g |", s.mean_s, s.std_s);
      out << cell;
    }
  }
  out << '\n';
  return out.str();
}

std::string BenchResult::to_json() const
{
  json arr = json::array();
  for (const auto & s : stages) {
    arr.push_back({{"stage", s.stage}, {"samples", s.samples}, {"mean_s", s.mean_s}, {"std_s", s.std_s}});
  }
  return json{{"device", device}, {"backend", backend}, {"stages", arr}}.dump(2) + "\n";
}

BenchResult run_bench(const BenchOptions & opts)
{
  if (opts.samples < 1) {
    throw Error(ErrorKind::InvalidConfig, "bench needs at least one sample");
  }
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(opts.images)) {
    for (const auto & entry : std::filesystem::directory_iterator(opts.images)) {
      const auto ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".png" || ext == ".ppm" || ext == ".pgm")) {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw Error(ErrorKind::IoFailure, "no PNG/PPM images in " + opts.images.string());
  }

  std::shared_ptr<DetectorBackend> detector;
  if (!opts.backend.oracle) {
    ExternalBackendOptions options;
    options.command = opts.backend.command;
    options.timeout = opts.backend.timeout;
    options.tile_format = opts.backend.tile_format;
    detector = std::make_shared<ExternalBackend>(options);
  }

  std::vector<double> read_s;
  std::vector<double> detect_s;
  std::vector<double> segment_s;
  for (int k = 0; k < opts.samples; ++k) {
    const auto & path = files[static_cast<std::size_t>(k) % files.size()];
    auto t0 = Clock::now();
    const Image image = read_image(path);
    read_s.push_back(seconds_since(t0));
    if (opts.backend.oracle) {
      // oracle truth comes from the image sidecar when present
      BackendSpec spec = opts.backend;
      spec.truth_csv.clear();
      detector = make_oracle(spec, path, image.width, image.height, GeoTransform{});
    }
    auto * segmenter = dynamic_cast<SegmenterBackend *>(detector.get());

    const TileWindow tile{0, 0, image.width, image.height, k};
    t0 = Clock::now();
    const TilePrediction pred = detector->detect(tile, image);
    detect_s.push_back(seconds_since(t0));

    if (opts.segment && segmenter != nullptr) {
      std::vector<Box> boxes;
      for (const auto & d : pred.detections) {
        boxes.push_back(d.box);
      }
      t0 = Clock::now();
      (void)segmenter->segment(tile, image, boxes);
      segment_s.push_back(seconds_since(t0));
    }
  }

  BenchResult result;
  result.device = opts.device;
  result.backend = opts.backend.oracle ? "oracle" : opts.backend.command;
  result.stages.push_back(summarize("read", read_s));
  result.stages.push_back(summarize("detect", detect_s));
  if (opts.segment) {
    result.stages.push_back(summarize("segment", segment_s));
  }
  return result;
}

std::vector<CalibrationPair> run_pairs(const std::filesystem::path & detections,
  const std::filesystem::path & truth_csv, const std::filesystem::path & raster)
{
  const auto info = probe_image(raster);
  const auto truth = read_truth_csv(truth_csv, info.width, info.height, GeoTransform{});
  const auto dets = detections_from_json(read_text(detections));
  const auto gts = truth_boxes(truth);
  return pair_with_iou(dets, gts);
}

}  // namespace orthopipe
