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

#include "orthopipe/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "json.hpp"
#include "orthopipe/error.hpp"

namespace orthopipe
{
namespace
{

template<class... Ts>
struct overloaded : Ts...
{
  using Ts::operator()...;
};

double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

void require_nonempty(std::span<const CalibrationPair> pairs)
{
  if (pairs.empty()) {
    throw Error(ErrorKind::NoDetections, "no detections to evaluate");
  }
}

double interpolate(const IsotonicParams & p, double score) noexcept
{
  const auto & xs = p.knot_scores;
  const auto & ys = p.knot_values;
  if (xs.empty()) {
    return score;
  }
  if (score <= xs.front()) {
    return ys.front();
  }
  if (score >= xs.back()) {
    return ys.back();
  }
  // First knot strictly greater than score; score lies in [xs[k-1], xs[k]).
  const auto k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), score) - xs.begin());
  const double x0 = xs[k - 1];
  const double x1 = xs[k];
  if (x1 == x0) {
    return ys[k];
  }
  const double t = (score - x0) / (x1 - x0);
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

}  // namespace

double logit(double p) noexcept
{
  const double q = std::clamp(p, kLogitEpsilon, 1.0 - kLogitEpsilon);
  return std::log(q / (1.0 - q));
}

double sigmoid(double z) noexcept
{
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string_view CalibrationModel::kind() const noexcept
{
  return std::visit(
    overloaded{
      [](const IdentityParams &) { return std::string_view("identity"); },
      [](const LinearParams &) { return std::string_view("linear"); },
      [](const IsotonicParams &) { return std::string_view("isotonic"); },
      [](const PlattParams &) { return std::string_view("platt"); },
      [](const TemperatureParams &) { return std::string_view("temperature"); },
    },
    params);
}

double CalibrationModel::apply(double score) const noexcept
{
  const double v = std::visit(
    overloaded{
      [&](const IdentityParams &) { return score; },
      [&](const LinearParams & p) { return p.slope * logit(score) + p.intercept; },
      [&](const IsotonicParams & p) { return interpolate(p, score); },
      [&](const PlattParams & p) { return sigmoid(p.a * logit(score) + p.b); },
      [&](const TemperatureParams & p) { return sigmoid(logit(score) / p.temperature); },
    },
    params);
  return std::isnan(v) ? 0.0 : clamp01(v);
}

void apply_calibration(const CalibrationModel & model, std::span<GlobalDetection> dets)
{
  for (auto & d : dets) {
    d.calibrated_score = model.apply(d.score);
  }
}

std::vector<CalibrationPair> pair_with_iou(std::span<const GlobalDetection> preds, std::span<const Box> gts)
{
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
    [&](std::size_t a, std::size_t b) { return nms_before(preds[a], preds[b]); });

  std::vector<CalibrationPair> pairs(preds.size());
  std::vector<bool> used(gts.size(), false);
  for (std::size_t i : order) {
    double best = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) {
        continue;
      }
      const double v = iou(preds[i].box, gts[g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      used[best_gt] = true;
    }
    pairs[i] = {preds[i].score, best};
  }
  return pairs;
}

std::vector<double> isotonic_regression(std::span<const double> values, std::span<const double> weights)
{
  if (!weights.empty() && weights.size() != values.size()) {
    throw Error(ErrorKind::InvalidConfig, "weights must match values");
  }
  struct Block
  {
    double weighted_sum;
    double weight;
    std::size_t end;  // one past the last member
    double mean() const { return weighted_sum / weight; }
  };
  std::vector<Block> stack;
  stack.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    stack.push_back({values[i] * w, w, i + 1});
    while (stack.size() >= 2 && stack[stack.size() - 2].mean() > stack.back().mean()) {
      const Block top = stack.back();
      stack.pop_back();
      stack.back().weighted_sum += top.weighted_sum;
      stack.back().weight += top.weight;
      stack.back().end = top.end;
    }
  }
  std::vector<double> fitted(values.size());
  std::size_t begin = 0;
  for (const auto & b : stack) {
    std::fill(fitted.begin() + static_cast<std::ptrdiff_t>(begin), fitted.begin() + static_cast<std::ptrdiff_t>(b.end),
      b.mean());
    begin = b.end;
  }
  return fitted;
}

CalibrationModel fit_linear(std::span<const CalibrationPair> pairs)
{
  const double n = static_cast<double>(pairs.size());
  double mean_z = 0.0;
  double mean_y = 0.0;
  for (const auto & p : pairs) {
    mean_z += logit(p.score);
    mean_y += p.iou;
  }
  if (pairs.size() < 2) {
    throw Error(ErrorKind::DegenerateFit, "linear calibration needs at least two pairs");
  }
  mean_z /= n;
  mean_y /= n;
  double szz = 0.0;
  double szy = 0.0;
  for (const auto & p : pairs) {
    const double dz = logit(p.score) - mean_z;
    szz += dz * dz;
    szy += dz * (p.iou - mean_y);
  }
  if (szz <= 0.0) {
    throw Error(ErrorKind::DegenerateFit, "all scores are equal");
  }
  const double slope = szy / szz;
  return {LinearParams{slope, mean_y - slope * mean_z}};
}

CalibrationModel fit_isotonic(std::span<const CalibrationPair> pairs)
{
  require_nonempty(pairs);
  std::vector<CalibrationPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(),
    [](const CalibrationPair & a, const CalibrationPair & b) { return a.score < b.score; });

  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> ws;
  for (const auto & p : sorted) {
    if (!xs.empty() && xs.back() == p.score) {
      ys.back() += p.iou;
      ws.back() += 1.0;
    } else {
      xs.push_back(p.score);
      ys.push_back(p.iou);
      ws.push_back(1.0);
    }
  }
  for (std::size_t i = 0; i < ys.size(); ++i) {
    ys[i] /= ws[i];
  }
  const auto fitted = isotonic_regression(ys, ws);

  IsotonicParams params;
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i;
    while (j + 1 < xs.size() && fitted[j + 1] == fitted[i]) {
      ++j;
    }
    params.knot_scores.push_back(xs[i]);
    params.knot_values.push_back(fitted[i]);
    if (j > i) {
      params.knot_scores.push_back(xs[j]);
      params.knot_values.push_back(fitted[i]);
    }
    i = j + 1;
  }
  return {std::move(params)};
}

CalibrationModel fit_platt(std::span<const CalibrationPair> pairs)
{
  if (pairs.size() < 2) {
    throw Error(ErrorKind::DegenerateFit, "Platt scaling needs at least two pairs");
  }
  std::vector<double> z(pairs.size());
  std::transform(pairs.begin(), pairs.end(), z.begin(), [](const CalibrationPair & p) { return logit(p.score); });

  const auto cost = [&](double a, double b) {
    double c = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double r = sigmoid(a * z[i] + b) - pairs[i].iou;
      c += r * r;
    }
    return c;
  };

  constexpr int kMaxIterations = 1000;
  double a = 1.0;
  double b = 0.0;
  double lambda = 1e-3;
  double current = cost(a, b);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    // Normal equations of the Gauss-Newton model.
    double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double s = sigmoid(a * z[i] + b);
      const double r = s - pairs[i].iou;
      const double ds = s * (1.0 - s);
      const double da = ds * z[i];
      jaa += da * da;
      jab += da * ds;
      jbb += ds * ds;
      ga += da * r;
      gb += ds * r;
    }
    if (std::max(std::abs(ga), std::abs(gb)) < 1e-12) {
      return {PlattParams{a, b}};
    }
    for (;;) {
      const double maa = jaa * (1.0 + lambda) + 1e-300;
      const double mbb = jbb * (1.0 + lambda) + 1e-300;
      const double det = maa * mbb - jab * jab;
      const double step_a = (-ga * mbb + gb * jab) / det;
      const double step_b = (-gb * maa + ga * jab) / det;
      const double trial = cost(a + step_a, b + step_b);
      if (std::isfinite(trial) && trial <= current) {
        a += step_a;
        b += step_b;
        const bool tiny = std::hypot(step_a, step_b) < 1e-12 * (1.0 + std::hypot(a, b));
        current = trial;
        lambda = std::max(lambda * 0.3, 1e-12);
        if (tiny) {
          return {PlattParams{a, b}};
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e15) {
        // No descent direction left at working precision.
        return {PlattParams{a, b}};
      }
    }
  }
  throw Error(ErrorKind::NonConvergence, "Platt scaling did not converge in 1000 iterations");
}

CalibrationModel fit_temperature(std::span<const CalibrationPair> pairs)
{
  require_nonempty(pairs);
  std::vector<double> z(pairs.size());
  std::transform(pairs.begin(), pairs.end(), z.begin(), [](const CalibrationPair & p) { return logit(p.score); });
  const auto objective = [&](double t) {
    double c = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double r = sigmoid(z[i] / t) - pairs[i].iou;
      c += r * r;
    }
    return c;
  };

  constexpr double kLo = 0.05;
  constexpr double kHi = 20.0;
  constexpr int kGrid = 400;
  std::vector<double> grid(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    grid[i] = kLo * std::pow(kHi / kLo, static_cast<double>(i) / (kGrid - 1));
  }
  int best = 0;
  double best_cost = objective(grid[0]);
  for (int i = 1; i < kGrid; ++i) {
    const double c = objective(grid[i]);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  const double lo = grid[std::max(0, best - 1)];
  const double hi = grid[std::min(kGrid - 1, best + 1)];
  const auto [t, c] = boost::math::tools::brent_find_minima(objective, lo, hi, 40);
  return {TemperatureParams{c <= best_cost ? t : grid[best]}};
}

CalibrationMethod parse_method(std::string_view name)
{
  if (name == "identity" || name == "none" || name == "fixed-threshold") {
    return CalibrationMethod::Identity;
  }
  if (name == "linear" || name == "lr") {
    return CalibrationMethod::Linear;
  }
  if (name == "isotonic" || name == "ir") {
    return CalibrationMethod::Isotonic;
  }
  if (name == "platt" || name == "ps") {
    return CalibrationMethod::Platt;
  }
  if (name == "temperature" || name == "ts") {
    return CalibrationMethod::Temperature;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown calibration method: " + std::string(name));
}

std::string_view method_label(CalibrationMethod method)
{
  switch (method) {
    case CalibrationMethod::Identity: return "Uncalibrated";
    case CalibrationMethod::Linear: return "LR";
    case CalibrationMethod::Isotonic: return "IR";
    case CalibrationMethod::Platt: return "PS";
    case CalibrationMethod::Temperature: return "TS";
  }
  return "?";
}

CalibrationModel fit(CalibrationMethod method, std::span<const CalibrationPair> pairs)
{
  switch (method) {
    case CalibrationMethod::Identity: return {IdentityParams{}};
    case CalibrationMethod::Linear: return fit_linear(pairs);
    case CalibrationMethod::Isotonic: return fit_isotonic(pairs);
    case CalibrationMethod::Platt: return fit_platt(pairs);
    case CalibrationMethod::Temperature: return fit_temperature(pairs);
  }
  return {IdentityParams{}};
}

std::vector<BinStat> reliability_bins(std::span<const CalibrationPair> pairs, int bins)
{
  if (bins < 1) {
    throw Error(ErrorKind::InvalidConfig, "bin count must be >= 1");
  }
  std::vector<BinStat> acc(static_cast<std::size_t>(bins));
  for (const auto & p : pairs) {
    const int j = std::clamp(static_cast<int>(std::floor(p.score * bins)), 0, bins - 1);
    auto & b = acc[static_cast<std::size_t>(j)];
    ++b.count;
    b.mean_conf += p.score;
    b.mean_iou += p.iou;
  }
  std::vector<BinStat> out;
  for (int j = 0; j < bins; ++j) {
    auto b = acc[static_cast<std::size_t>(j)];
    if (b.count == 0) {
      continue;
    }
    b.index = j + 1;
    b.mean_conf /= static_cast<double>(b.count);
    b.mean_iou /= static_cast<double>(b.count);
    out.push_back(b);
  }
  return out;
}

double laece0(std::span<const CalibrationPair> pairs, int bins)
{
  require_nonempty(pairs);
  double total = 0.0;
  for (const auto & b : reliability_bins(pairs, bins)) {
    total += static_cast<double>(b.count) * std::abs(b.mean_conf - b.mean_iou);
  }
  return total / static_cast<double>(pairs.size());
}

double laace0(std::span<const CalibrationPair> pairs)
{
  require_nonempty(pairs);
  double total = 0.0;
  for (const auto & p : pairs) {
    total += std::abs(p.score - p.iou);
  }
  return total / static_cast<double>(pairs.size());
}

double select_threshold(std::span<const CalibrationPair> pairs, const ThresholdCriterion & criterion)
{
  if (const auto * fixed = std::get_if<FixedThreshold>(&criterion)) {
    return fixed->value;
  }
  const auto & f1 = std::get<F1Criterion>(criterion);
  require_nonempty(pairs);

  std::vector<CalibrationPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(),
    [](const CalibrationPair & a, const CalibrationPair & b) { return a.score > b.score; });
  const auto is_hit = [&](const CalibrationPair & p) { return p.iou >= f1.match_iou; };
  const double positives = f1.num_ground_truth
    ? static_cast<double>(*f1.num_ground_truth)
    : static_cast<double>(std::count_if(sorted.begin(), sorted.end(), is_hit));

  double tp = 0.0;
  double fp = 0.0;
  double best_f1 = -1.0;
  double best_threshold = sorted.front().score;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == t) {
      (is_hit(sorted[i]) ? tp : fp) += 1.0;
      ++i;
    }
    const double fn = std::max(0.0, positives - tp);
    const double denom = 2.0 * tp + fp + fn;
    const double score = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    // Descending sweep: only a strict improvement moves to a lower threshold.
    if (score > best_f1) {
      best_f1 = score;
      best_threshold = t;
    }
  }
  return best_threshold;
}

std::string model_to_json(const CalibrationModel & model)
{
  using nlohmann::json;
  json params = std::visit(
    overloaded{
      [](const IdentityParams &) { return json::object(); },
      [](const LinearParams & p) { return json{{"slope", p.slope}, {"intercept", p.intercept}}; },
      [](const IsotonicParams & p) {
        return json{{"knot_scores", p.knot_scores}, {"knot_values", p.knot_values}};
      },
      [](const PlattParams & p) { return json{{"a", p.a}, {"b", p.b}}; },
      [](const TemperatureParams & p) { return json{{"temperature", p.temperature}}; },
    },
    model.params);
  return json{{"kind", model.kind()}, {"params", params}}.dump(2);
}

CalibrationModel model_from_json(std::string_view text)
{
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    const auto kind = j.at("kind").get<std::string>();
    const json & p = j.contains("params") ? j.at("params") : json::object();
    if (kind == "identity") {
      return {IdentityParams{}};
    }
    if (kind == "linear") {
      return {LinearParams{p.at("slope").get<double>(), p.at("intercept").get<double>()}};
    }
    if (kind == "platt") {
      return {PlattParams{p.at("a").get<double>(), p.at("b").get<double>()}};
    }
    if (kind == "temperature") {
      const double t = p.at("temperature").get<double>();
      if (!(t > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
      }
      return {TemperatureParams{t}};
    }
    if (kind == "isotonic") {
      IsotonicParams iso{p.at("knot_scores").get<std::vector<double>>(), p.at("knot_values").get<std::vector<double>>()};
      if (iso.knot_scores.size() != iso.knot_values.size() ||
        !std::is_sorted(iso.knot_scores.begin(), iso.knot_scores.end()) ||
        !std::is_sorted(iso.knot_values.begin(), iso.knot_values.end()))
      {
        throw Error(ErrorKind::InvalidConfig, "isotonic knots must be sorted and paired");
      }
      return {std::move(iso)};
    }
    throw Error(ErrorKind::InvalidConfig, "unknown calibration model kind: " + kind);
  } catch (const json::exception & e) {
    throw Error(ErrorKind::InvalidConfig, std::string("bad calibration model JSON: ") + e.what());
  }
}

}  // namespace orthopipe
