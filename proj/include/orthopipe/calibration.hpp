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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "orthopipe/fusion.hpp"

namespace orthopipe
{

/// One detection's raw confidence and its IoU with the matched ground truth
/// (0 when unmatched).
struct CalibrationPair
{
  double score = 0.0;
  double iou = 0.0;

  friend bool operator==(const CalibrationPair &, const CalibrationPair &) = default;
};

/// Clamp applied before taking logits.
inline constexpr double kLogitEpsilon = 1e-6;

/// ln(p / (1 - p)) with p clamped to [1e-6, 1 - 1e-6].
double logit(double p) noexcept;
double sigmoid(double z) noexcept;

struct IdentityParams
{
  friend bool operator==(const IdentityParams &, const IdentityParams &) = default;
};

/// calibrated = slope * logit(score) + intercept
struct LinearParams
{
  double slope = 1.0;
  double intercept = 0.0;
  friend bool operator==(const LinearParams &, const LinearParams &) = default;
};

/// Piecewise-linear interpolation through non-decreasing knots; constant
/// outside the knot range. Each PAVA block contributes its lowest and highest
/// training score, both at the block value.
struct IsotonicParams
{
  std::vector<double> knot_scores;
  std::vector<double> knot_values;
  friend bool operator==(const IsotonicParams &, const IsotonicParams &) = default;
};

/// calibrated = sigmoid(a * logit(score) + b)
struct PlattParams
{
  double a = 1.0;
  double b = 0.0;
  friend bool operator==(const PlattParams &, const PlattParams &) = default;
};

/// calibrated = sigmoid(logit(score) / temperature)
struct TemperatureParams
{
  double temperature = 1.0;
  friend bool operator==(const TemperatureParams &, const TemperatureParams &) = default;
};

struct CalibrationModel
{
  std::variant<IdentityParams, LinearParams, IsotonicParams, PlattParams, TemperatureParams> params;

  /// "identity", "linear", "isotonic", "platt" or "temperature".
  std::string_view kind() const noexcept;

  /// Calibrated confidence, always within [0, 1].
  double apply(double score) const noexcept;

  friend bool operator==(const CalibrationModel &, const CalibrationModel &) = default;
};

inline double apply(const CalibrationModel & model, double score) noexcept { return model.apply(score); }

/// Sets calibrated_score on every detection.
void apply_calibration(const CalibrationModel & model, std::span<GlobalDetection> dets);

/// Pairs each prediction (output index = input index) with the unused ground
/// truth box of highest IoU. Predictions claim boxes in nms_before order.
std::vector<CalibrationPair> pair_with_iou(std::span<const GlobalDetection> preds, std::span<const Box> gts);

/// Weighted pool-adjacent-violators on an already ordered sequence: the
/// least-squares non-decreasing fit. `weights` may be empty (all ones).
std::vector<double> isotonic_regression(std::span<const double> values, std::span<const double> weights = {});

/// Least-squares line from logit(score) to IoU. Throws DegenerateFit when
/// fewer than two distinct scores exist.
CalibrationModel fit_linear(std::span<const CalibrationPair> pairs);

/// Isotonic regression of IoU on score; equal scores are pooled first.
CalibrationModel fit_isotonic(std::span<const CalibrationPair> pairs);

/// Platt scaling by Levenberg-Marquardt on squared error to IoU. Converged
/// when the gradient infinity-norm falls below 1e-12 or the accepted step is
/// below 1e-12 relative to the parameters; NonConvergence after 1000
/// iterations.
CalibrationModel fit_platt(std::span<const CalibrationPair> pairs);

/// Temperature on [0.05, 20] minimizing squared error to IoU: log-spaced scan
/// followed by Brent refinement to 1e-9 relative.
CalibrationModel fit_temperature(std::span<const CalibrationPair> pairs);

enum class CalibrationMethod { Identity, Linear, Isotonic, Platt, Temperature };

CalibrationMethod parse_method(std::string_view name);
std::string_view method_label(CalibrationMethod method);  // IR, LR, PS, TS, Uncalibrated
CalibrationModel fit(CalibrationMethod method, std::span<const CalibrationPair> pairs);

struct BinStat
{
  int index = 0;  // 1-based
  std::size_t count = 0;
  double mean_conf = 0.0;
  double mean_iou = 0.0;
};

/// Equal-width bins on [0, 1]; bin j (1-based) holds [(j-1)/J, j/J), the last
/// bin also holds 1.0. Empty bins are omitted.
std::vector<BinStat> reliability_bins(std::span<const CalibrationPair> pairs, int bins = 25);

/// Count-weighted mean |mean confidence - mean IoU| over the bins.
double laece0(std::span<const CalibrationPair> pairs, int bins = 25);

/// Mean |confidence - IoU| over detections.
double laace0(std::span<const CalibrationPair> pairs);

/// Maximize F1, counting a detection as a hit when iou >= match_iou.
/// `num_ground_truth` defaults to the number of hits among all pairs.
struct F1Criterion
{
  double match_iou = 0.5;
  std::optional<std::size_t> num_ground_truth;
};

struct FixedThreshold
{
  double value = 0.0;
};

using ThresholdCriterion = std::variant<F1Criterion, FixedThreshold>;

/// Keeps detections with score >= the returned value. F1 is swept over the
/// observed scores; ties resolve toward the higher threshold.
double select_threshold(std::span<const CalibrationPair> pairs, const ThresholdCriterion & criterion);

std::string model_to_json(const CalibrationModel & model);
CalibrationModel model_from_json(std::string_view text);

}  // namespace orthopipe
