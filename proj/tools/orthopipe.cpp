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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "orthopipe/error.hpp"
#include "orthopipe/formats.hpp"
#include "orthopipe/pipeline.hpp"

namespace
{

using namespace orthopipe;

struct NoiseFlags
{
  double drop_rate = 0.0;
  double spurious_rate = 0.0;
  double jitter = 0.0;
  double score_bias = 0.0;
  double score_sigma = 0.0;
  std::uint64_t seed = 0;
  double min_visible = 0.8;
  std::vector<CLI::Option *> options;

  void add(CLI::App & app)
  {
    options = {
      app.add_option("--drop-rate", drop_rate, "Oracle: probability an object is missed"),
      app.add_option("--spurious-rate", spurious_rate, "Oracle: mean false positives per tile"),
      app.add_option("--jitter", jitter, "Oracle: box center jitter sigma in pixels"),
      app.add_option("--score-bias", score_bias, "Oracle: score = IoU + bias + noise"),
      app.add_option("--score-sigma", score_sigma, "Oracle: score noise sigma"),
      app.add_option("--seed", seed, "Oracle: noise seed"),
      app.add_option("--min-visible", min_visible, "Oracle: visible fraction needed to emit a clipped object"),
    };
  }

  bool any() const
  {
    for (const auto * o : options) {
      if (o->count() > 0) {
        return true;
      }
    }
    return false;
  }

  void apply(OracleNoise & n) const
  {
    if (options.empty()) {
      return;
    }
    const auto set = [](const CLI::Option * o, auto & dst, auto v) {
      if (o->count() > 0) {
        dst = v;
      }
    };
    set(options[0], n.drop_rate, drop_rate);
    set(options[1], n.spurious_rate, spurious_rate);
    set(options[2], n.center_jitter_sigma, jitter);
    set(options[3], n.score_law.bias, score_bias);
    set(options[4], n.score_law.sigma, score_sigma);
    set(options[5], n.seed, seed);
    set(options[6], n.min_visible_fraction, min_visible);
  }
};

ImageFormat parse_format(const std::string & s)
{
  if (s == "png") {
    return ImageFormat::Png;
  }
  if (s == "ppm") {
    return ImageFormat::Ppm;
  }
  throw Error(ErrorKind::InvalidConfig, "tile format must be png or ppm");
}

BackendSpec backend_from(const std::string & text, const std::string & truth, const NoiseFlags & noise,
  std::int64_t timeout_ms, const std::string & tile_format)
{
  BackendSpec spec = BackendSpec::parse(text);
  spec.truth_csv = truth;
  noise.apply(spec.noise);
  spec.noise.validate();
  spec.timeout = std::chrono::milliseconds(timeout_ms);
  spec.tile_format = parse_format(tile_format);
  return spec;
}

std::string fmt(const char * f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Tiled detection, calibration and counting over georeferenced orthomosaics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // detect
  auto * detect = app.add_subcommand("detect", "Run tiled detection over a raster");
  std::string d_config;
  std::string d_raster;
  std::string d_worldfile;
  int d_tile = 800;
  int d_stride = 400;
  double d_nms = 0.5;
  std::string d_backend = "oracle";
  int d_workers = 1;
  std::string d_calib;
  double d_threshold = 0.0;
  std::string d_out;
  std::string d_truth;
  std::int64_t d_timeout = 30000;
  std::string d_format = "png";
  NoiseFlags d_noise;
  detect->add_option("--config", d_config, "JSON config; flags override it");
  auto * o_raster = detect->add_option("--raster", d_raster, "Input raster (PNG or PPM)");
  auto * o_wf = detect->add_option("--worldfile", d_worldfile, "World file; defaults to the raster sidecar");
  auto * o_tile = detect->add_option("--tile", d_tile, "Tile side in pixels");
  auto * o_stride = detect->add_option("--stride", d_stride, "Tile stride in pixels");
  auto * o_nms = detect->add_option("--nms-iou", d_nms, "NMS IoU threshold");
  auto * o_backend = detect->add_option("--backend", d_backend, "'oracle' or a backend command line");
  auto * o_workers = detect->add_option("--workers", d_workers, "Concurrent backend workers");
  auto * o_calib = detect->add_option("--calib", d_calib, "Calibration model JSON");
  auto * o_threshold = detect->add_option("--threshold", d_threshold, "Minimum raw score to keep");
  auto * o_out = detect->add_option("--out-dir", d_out, "Output directory");
  auto * o_truth = detect->add_option("--truth", d_truth, "Oracle truth CSV");
  auto * o_timeout = detect->add_option("--timeout-ms", d_timeout, "External backend timeout per request");
  detect->add_option("--tile-format", d_format, "Tile format handed to external backends (png|ppm)");
  d_noise.add(*detect);

  // segment
  auto * segment = app.add_subcommand("segment", "Segment previously detected boxes");
  std::string s_raster;
  std::string s_worldfile;
  std::string s_detections;
  std::string s_backend = "oracle";
  int s_tile = 800;
  int s_stride = 400;
  std::string s_masks;
  std::string s_overlay;
  std::int64_t s_timeout = 30000;
  std::string s_format = "png";
  segment->add_option("--raster", s_raster, "Input raster")->required();
  segment->add_option("--worldfile", s_worldfile, "World file");
  segment->add_option("--detections", s_detections, "boxes.json written by detect")->required();
  segment->add_option("--backend", s_backend, "'oracle' or a backend command line");
  segment->add_option("--tile", s_tile, "Tile side in pixels");
  segment->add_option("--stride", s_stride, "Tile stride in pixels");
  segment->add_option("--masks", s_masks, "Mask JSON output; defaults to masks.json next to the detections");
  segment->add_option("--overlay", s_overlay, "Optional overlay image (PNG or PPM)");
  segment->add_option("--timeout-ms", s_timeout, "External backend timeout per request");
  segment->add_option("--tile-format", s_format, "Tile format handed to external backends (png|ppm)");

  // calibrate
  auto * calibrate = app.add_subcommand("calibrate", "Fit a score calibrator from (score, IoU) pairs");
  std::string c_pairs;
  std::vector<std::string> c_methods{"isotonic"};
  int c_bins = 25;
  double c_threshold = 0.0;
  bool c_f1 = false;
  std::string c_model_out;
  std::string c_model_name = "detector";
  calibrate->add_option("--pairs", c_pairs, "CSV with score,iou columns")->required();
  calibrate->add_option("--method", c_methods, "linear|isotonic|platt|temperature|identity|all (repeatable)");
  calibrate->add_option("--bins", c_bins, "Reliability bins for LaECE0");
  auto * o_cthr = calibrate->add_option("--threshold", c_threshold, "Drop pairs scoring below this before fitting");
  calibrate->add_flag("--threshold-f1", c_f1, "Choose the threshold maximizing F1 at IoU 0.5");
  calibrate->add_option("--model-out", c_model_out, "Fitted model JSON");
  calibrate->add_option("--model-name", c_model_name, "Model column of the printed table");

  // eval-count
  auto * eval = app.add_subcommand("eval-count", "Match predicted centers against ground truth");
  std::string e_pred;
  std::string e_gt;
  double e_dist = 5.0;
  bool e_many = false;
  std::string e_site = "site";
  double e_area = 0.0;
  std::string e_out;
  bool e_svg = false;
  eval->add_option("--pred", e_pred, "Predicted centers (GeoJSON or CSV x,y)")->required();
  eval->add_option("--gt", e_gt, "Ground-truth centers (GeoJSON or CSV x,y)")->required();
  eval->add_option("--dist", e_dist, "Match radius in meters");
  eval->add_flag("--allow-many-to-one", e_many, "Let several sources match one target");
  eval->add_option("--site", e_site, "Site label for the report row");
  auto * o_area = eval->add_option("--area-ha", e_area, "Site area in hectares");
  eval->add_option("--out-dir", e_out, "Output directory for report files");
  eval->add_flag("--svg", e_svg, "Also write cumulative.svg");

  // bench
  auto * bench = app.add_subcommand("bench", "Time detection and segmentation per image");
  std::string b_images;
  std::string b_backend = "oracle";
  int b_n = 20;
  bool b_segment = false;
  std::string b_device = "cpu";
  std::string b_json;
  std::int64_t b_timeout = 30000;
  bench->add_option("--images", b_images, "Directory of PNG/PPM images")->required();
  bench->add_option("--backend", b_backend, "'oracle' or a backend command line");
  bench->add_option("--n", b_n, "Number of timed images");
  bench->add_flag("--segment", b_segment, "Also time segmentation");
  bench->add_option("--device", b_device, "Device label for the table row");
  bench->add_option("--json", b_json, "Write raw statistics as JSON");
  bench->add_option("--timeout-ms", b_timeout, "External backend timeout per request");

  // synth
  auto * synth = app.add_subcommand("synth", "Generate a synthetic georeferenced scene");
  SceneConfig sc;
  std::string y_out = ".";
  std::string y_stem = "scene";
  std::string y_format = "png";
  synth->add_option("--width", sc.width, "Raster width");
  synth->add_option("--height", sc.height, "Raster height");
  synth->add_option("--gsd", sc.gsd, "Ground sample distance in meters");
  synth->add_option("--objects", sc.n_objects, "Number of planted objects");
  synth->add_option("--radius-min", sc.radius_min, "Minimum object radius in pixels");
  synth->add_option("--radius-max", sc.radius_max, "Maximum object radius in pixels");
  synth->add_option("--arms-min", sc.arms_min, "Minimum crown arms");
  synth->add_option("--arms-max", sc.arms_max, "Maximum crown arms");
  synth->add_option("--min-gap", sc.min_center_gap, "Minimum center distance in pixels");
  synth->add_option("--gradient", sc.illumination_gradient, "Illumination ramp amplitude");
  synth->add_option("--seed", sc.seed, "Random seed");
  synth->add_option("--origin-x", sc.origin_x, "World x of the top-left corner");
  synth->add_option("--origin-y", sc.origin_y, "World y of the top-left corner");
  synth->add_option("--out-dir", y_out, "Output directory");
  synth->add_option("--stem", y_stem, "Output file stem");
  synth->add_option("--format", y_format, "Raster format (png|ppm)");

  // pairs
  auto * pairs = app.add_subcommand("pairs", "Pair detections with truth boxes to build calibration data");
  std::string p_dets;
  std::string p_truth;
  std::string p_raster;
  std::string p_out;
  pairs->add_option("--detections", p_dets, "boxes.json written by detect")->required();
  pairs->add_option("--truth", p_truth, "Truth CSV written by synth")->required();
  pairs->add_option("--raster", p_raster, "Raster the truth belongs to")->required();
  pairs->add_option("--out", p_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::InvalidConfig);
  }

  try {
    if (detect->parsed()) {
      PipelineConfig cfg;
      if (!d_config.empty()) {
        apply_config_json(cfg, read_text(d_config));
      }
      if (o_raster->count() > 0) cfg.raster = d_raster;
      if (o_wf->count() > 0) cfg.worldfile = d_worldfile;
      if (o_tile->count() > 0) cfg.tiling.tile = d_tile;
      if (o_stride->count() > 0) cfg.tiling.stride = d_stride;
      if (o_nms->count() > 0) cfg.nms_iou = d_nms;
      if (o_backend->count() > 0) {
        auto spec = BackendSpec::parse(d_backend);
        spec.truth_csv = cfg.backend.truth_csv;
        spec.noise = cfg.backend.noise;
        spec.timeout = cfg.backend.timeout;
        cfg.backend = spec;
      }
      if (o_workers->count() > 0) cfg.workers = d_workers;
      if (o_calib->count() > 0) cfg.calibration_model = d_calib;
      if (o_threshold->count() > 0) cfg.threshold = d_threshold;
      if (o_out->count() > 0) cfg.out_dir = d_out;
      if (o_truth->count() > 0) cfg.backend.truth_csv = d_truth;
      if (o_timeout->count() > 0) cfg.backend.timeout = std::chrono::milliseconds(d_timeout);
      cfg.backend.tile_format = parse_format(d_format);
      d_noise.apply(cfg.backend.noise);
      if (cfg.raster.empty()) {
        throw Error(ErrorKind::InvalidConfig, "--raster is required");
      }
      const auto r = run_detect(cfg);
      std::cout << "tiles " << r.manifest.tiles << ", raw " << r.manifest.raw_detections << ", after nms "
                << r.manifest.after_nms << ", kept " << r.manifest.after_threshold << "\n";
    } else if (segment->parsed()) {
      SegmentOptions opts;
      opts.raster = s_raster;
      opts.worldfile = s_worldfile;
      opts.detections = s_detections;
      opts.backend = backend_from(s_backend, "", NoiseFlags{}, s_timeout, s_format);
      opts.tiling = {s_tile, s_stride};
      opts.masks_out = s_masks.empty() ? opts.detections.parent_path() / "masks.json" : std::filesystem::path(s_masks);
      opts.overlay_out = s_overlay;
      const auto segs = run_segment(opts);
      std::cout << segs.size() << " masks written to " << opts.masks_out.string() << "\n";
    } else if (calibrate->parsed()) {
      CalibrateOptions opts;
      opts.pairs = c_pairs;
      opts.bins = c_bins;
      opts.model_out = c_model_out;
      opts.model_name = c_model_name;
      for (const auto & m : c_methods) {
        if (m == "all") {
          opts.methods = {CalibrationMethod::Isotonic, CalibrationMethod::Linear, CalibrationMethod::Platt,
            CalibrationMethod::Temperature};
          break;
        }
        opts.methods.push_back(parse_method(m));
      }
      if (c_f1 && o_cthr->count() > 0) {
        throw Error(ErrorKind::InvalidConfig, "--threshold and --threshold-f1 are exclusive");
      }
      if (c_f1) {
        opts.threshold = F1Criterion{};
      } else if (o_cthr->count() > 0) {
        opts.threshold = FixedThreshold{c_threshold};
      }
      const auto r = run_calibrate(opts);
      std::cout << "pairs " << r.pairs_used << "/" << r.pairs_in;
      if (r.threshold) {
        std::cout << ", threshold " << fmt("%.4f", *r.threshold);
      }
      std::cout << "\n" << r.table();
    } else if (eval->parsed()) {
      EvalCountOptions opts;
      opts.pred = e_pred;
      opts.gt = e_gt;
      opts.match = {e_dist, e_many};
      opts.site = e_site;
      if (o_area->count() > 0) {
        opts.area_ha = e_area;
      }
      opts.out_dir = e_out;
      opts.svg = e_svg;
      const auto r = run_eval_count(opts);
      std::cout << kCountingCsvHeader << "\n" << counting_row_csv(r.row) << "\n";
    } else if (bench->parsed()) {
      BenchOptions opts;
      opts.images = b_images;
      opts.backend = backend_from(b_backend, "", NoiseFlags{}, b_timeout, "png");
      opts.samples = b_n;
      opts.segment = b_segment;
      opts.device = b_device;
      const auto r = run_bench(opts);
      if (!b_json.empty()) {
        write_text(b_json, r.to_json());
      }
      std::cout << r.table();
    } else if (synth->parsed()) {
      const Scene scene = generate(sc);
      const auto files = write_scene(scene, y_out, y_stem, parse_format(y_format));
      std::cout << scene.truth.objects.size() << " objects written to " << files.raster.string() << "\n";
    } else if (pairs->parsed()) {
      const auto p = run_pairs(p_dets, p_truth, p_raster);
      write_text(p_out, pairs_to_csv(p));
      std::cout << p.size() << " pairs written to " << p_out << "\n";
    }
  } catch (const Error & e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error & e) {
    std::cerr << "error: IoFailure: " << e.what() << "\n";
    return exit_code(ErrorKind::IoFailure);
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
