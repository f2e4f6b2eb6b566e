// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace van {

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
};

/// Temporal intersection over union; 0 for disjoint intervals.
double tiou(const Interval& a, const Interval& b);

}  // namespace van
