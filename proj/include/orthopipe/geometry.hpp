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

#include <algorithm>

namespace orthopipe
{

/// Axis-aligned box in pixel coordinates, edges at x1 < x2, y1 < y2.
struct Box
{
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const noexcept { return 0.5 * (x1 + x2); }
  double center_y() const noexcept { return 0.5 * (y1 + y2); }
  bool valid() const noexcept { return x1 < x2 && y1 < y2; }

  Box translated(double dx, double dy) const noexcept { return {x1 + dx, y1 + dy, x2 + dx, y2 + dy}; }

  Box clipped(double xmin, double ymin, double xmax, double ymax) const noexcept
  {
    return {std::clamp(x1, xmin, xmax), std::clamp(y1, ymin, ymax), std::clamp(x2, xmin, xmax),
      std::clamp(y2, ymin, ymax)};
  }

  friend bool operator==(const Box &, const Box &) = default;
};

inline double intersection_area(const Box & a, const Box & b) noexcept
{
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace orthopipe
