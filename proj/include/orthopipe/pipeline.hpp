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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orthopipe/backend.hpp"
#include "orthopipe/calibration.hpp"
#include "orthopipe/count_eval.hpp"
#include "orthopipe/external_backend.hpp"
#include "orthopipe/fusion.hpp"
#include "orthopipe/geo_raster.hpp"
#include "orthopipe/synth.hpp"

namespace orthopipe
{

inline constexpr std::string_view kVersion = "0.1.0";

/// Either the built-in oracle (planted truth + noise) or an external command.
struct BackendSpec
{
  bool oracle = true;
  std::string command;
  /// Oracle only: truth CSV; defaults to <raster stem>.truth.csv.
  std::filesystem::path truth_csv;
  OracleNoise noise = OracleNoise::noiseless();
  std::chrono::milliseconds timeout{30000};
  ImageFormat tile_format = ImageFormat::Png;

  /// "oracle" selects the oracle; anything else is a shell command.
  static BackendSpec parse(std::string_view text);
};

struct PipelineConfig
{
  std::filesystem::path raster;
  /// Defaults to the conventional sidecar next to the raster.
  std::filesystem::path worldfile;
  TilingConfig tiling;
  double nms_iou = 0.5;
  BackendSpec backend;
  int workers = 1;
  std::optional<std::filesystem::path> calibration_model;
  /// Minimum raw score kept after fusion.
  std::optional<double> threshold;
  /// Empty: nothing is written.
  std::filesystem::path out_dir;

  void validate() const;
};

/// Overlays keys of a JSON config object onto `cfg`; unknown keys are errors.
void apply_config_json(PipelineConfig & cfg, std::string_view json_text);

struct StageTime
{
  std::string stage;
  double seconds = 0.0;
};

struct RunManifest
{
  std::string raster_path;
  int raster_width = 0;
  int raster_height = 0;
  std::uint64_t raster_bytes = 0;
  std::string raster_crc32;
  std::string config_json;
  std::vector<StageTime> stages;
  std::size_t tiles = 0;
  std::size_t raw_detections = 0;
  std::size_t after_nms = 0;
  std::size_t after_threshold = 0;
  std::string tool_version{kVersion};

  std::string to_json() const;
};

using DetectorFactory = std::function<std::shared_ptr<DetectorBackend>()>;

struct DetectResult
{
  std::vector<GlobalDetection> detections;
  std::vector<GeoPoint> centers;
  RunManifest manifest;
};

/// Tile -> detect -> to_global -> NMS -> calibrate -> threshold -> centers on
/// an open raster. Each of `workers` threads owns one backend from `factory`;
/// per-tile results are gathered by tile index, so the output does not depend
/// on scheduling.
DetectResult detect_raster(const RasterSource & raster, const DetectorFactory & factory, const PipelineConfig & cfg);

/// Factory for a backend spec; the oracle loads its truth once and is shared.
DetectorFactory make_detector_factory(const BackendSpec & spec, const std::filesystem::path & raster, int width,
  int height, const GeoTransform & transform);

/// Full detect command. Writes boxes.json, centers.geojson, centers.csv and
/// manifest.json into out_dir when set.
DetectResult run_detect(const PipelineConfig & cfg);

struct SegmentOptions
{
  std::filesystem::path raster;
  std::filesystem::path worldfile;
  std::filesystem::path detections;
  BackendSpec backend;
  TilingConfig tiling;
  std::filesystem::path masks_out;
  std::filesystem::path overlay_out;
};

struct SegmentedDetection
{
  std::size_t detection = 0;
  TileWindow window;
  MaskRLE mask;
};

/// Each detection is segmented inside the first tile that contains it (or a
/// tile-sized window around it when none does); one backend request per tile.
std::vector<SegmentedDetection> segment_detections(const RasterSource & raster,
  std::span<const GlobalDetection> dets, SegmenterBackend & backend, const TilingConfig & tiling);

std::string segments_to_json(std::span<const SegmentedDetection> segs);

/// Raster copy with mask pixels tinted and box outlines drawn.
Image render_overlay(const RasterSource & raster, std::span<const GlobalDetection> dets,
  std::span<const SegmentedDetection> segs);

std::vector<SegmentedDetection> run_segment(const SegmentOptions & opts);

struct CalibrateOptions
{
  std::filesystem::path pairs;
  std::vector<CalibrationMethod> methods;
  int bins = 25;
  std::optional<ThresholdCriterion> threshold;
  /// Model column of the metrics table.
  std::string model_name = "detector";
  /// With several methods, "<stem>.<kind>.json" per method.
  std::filesystem::path model_out;
};

struct CalibrationScore
{
  CalibrationMethod method = CalibrationMethod::Identity;
  CalibrationModel model;
  double laece0 = 0.0;
  double laace0 = 0.0;
};

struct CalibrateResult
{
  std::size_t pairs_in = 0;
  std::size_t pairs_used = 0;
  std::optional<double> threshold;
  std::string model_name = "detector";
  double uncalibrated_laece0 = 0.0;
  double uncalibrated_laace0 = 0.0;
  std::vector<CalibrationScore> scores;

  /// Metric | Model | Uncalibrated | <one column per method>, values in percent.
  std::string table() const;
};

CalibrateResult calibrate_pairs(std::span<const CalibrationPair> pairs, const CalibrateOptions & opts);
CalibrateResult run_calibrate(const CalibrateOptions & opts);

struct EvalCountOptions
{
  std::filesystem::path pred;
  std::filesystem::path gt;
  MatchConfig match;
  std::string site = "site";
  std::optional<double> area_ha;
  std::filesystem::path out_dir;
  bool svg = false;
};

struct EvalCountResult
{
  MatchReport report;
  MatchReport alternate;
  CountingRow row;
};

EvalCountResult run_eval_count(const EvalCountOptions & opts);

struct BenchOptions
{
  std::filesystem::path images;
  BackendSpec backend;
  int samples = 20;
  bool segment = false;
  std::string device = "cpu";
};

struct StageStats
{
  std::string stage;
  std::size_t samples = 0;
  double mean_s = 0.0;
  /// Sample standard deviation; 0 for a single sample.
  double std_s = 0.0;
};

struct BenchResult
{
  std::string device;
  std::string backend;
  std::vector<StageStats> stages;

  /// Header plus one row: device, then mean±std per timed stage.
  std::string table() const;
  std::string to_json() const;
};

StageStats summarize(std::string stage, std::span<const double> seconds);
BenchResult run_bench(const BenchOptions & opts);

/// IoU pairs for detections against the planted truth of a raster.
std::vector<CalibrationPair> run_pairs(const std::filesystem::path & detections,
  const std::filesystem::path & truth_csv, const std::filesystem::path & raster);

}  // namespace orthopipe
