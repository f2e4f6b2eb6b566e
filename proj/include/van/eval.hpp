// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "van/interval.hpp"
#include "van/network.hpp"
#include "van/synth.hpp"

namespace van {

struct Detection {
  std::uint32_t sequence = 0;
  int label = 1;
  double score = 0.0;
  Interval interval;
  std::optional<std::array<double, 2>> boundary_variances;
};

struct GroundTruth {
  std::uint32_t sequence = 0;
  int label = 1;
  Interval interval;
};

inline const std::vector<double> kDefaultTious{0.3, 0.4, 0.5, 0.6, 0.7};

/// Greedy per-(sequence, class) suppression: keep the highest score, drop any
/// detection with tIoU >= threshold against an already kept one.
std::vector<Detection> nms(std::vector<Detection> detections, double threshold);

/// All-point interpolated AP for one class. Each ground truth can be matched
/// once; a detection takes the unmatched ground truth of highest tIoU.
double average_precision(const std::vector<Detection>& detections, const std::vector<GroundTruth>& truths,
                         double tiou_threshold);

struct MapResult {
  std::vector<double> thresholds;
  std::vector<double> map;  // one per threshold
  double average = 0.0;     // mean over thresholds
};

/// Mean over ground-truth classes of per-class AP, at every threshold.
MapResult map_at_tious(const std::vector<Detection>& detections, const std::vector<GroundTruth>& truths,
                       const std::vector<double>& thresholds = kDefaultTious);

/// Test-time cascade: each step re-pools the current (refined) intervals and
/// moves them by the offsets of the top-scoring foreground class. Parameters
/// are shared across steps. Returns one detection per proposal.
std::vector<Detection> cascade_infer(const NetworkParams& params, const NetworkConfig& config,
                                     const SyntheticSequence& seq, const std::vector<Interval>& proposals,
                                     int steps);

/// Runs cascade_infer over every sequence of a split, then NMS.
std::vector<Detection> detect_dataset(const NetworkParams& params, const NetworkConfig& config, const Dataset& data,
                                      int steps, double nms_threshold);

std::vector<GroundTruth> ground_truths(const Dataset& data);

}  // namespace van
