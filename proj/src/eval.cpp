// SPDX-License-Identifier: Apache-2.0
#include "van/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "van/errors.hpp"

namespace van {

double tiou(const Interval& a, const Interval& b) {
  const double inter = std::min(a.end, b.end) - std::max(a.start, b.start);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

// Score-descending order; ties broken by position so results never depend on
// the input order.
bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.sequence != b.sequence) return a.sequence < b.sequence;
  if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
  return a.interval.end < b.interval.end;
}

}  // namespace

std::vector<Detection> nms(std::vector<Detection> detections, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("nms: threshold must be in (0, 1]");
  std::stable_sort(detections.begin(), detections.end(), ranks_before);
  std::vector<Detection> kept;
  for (const Detection& d : detections) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.sequence == d.sequence && k.label == d.label && tiou(k.interval, d.interval) >= threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

double average_precision(const std::vector<Detection>& detections, const std::vector<GroundTruth>& truths,
                         double tiou_threshold) {
  if (truths.empty()) return 0.0;
  std::vector<Detection> ranked = detections;
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);

  std::map<std::uint32_t, std::vector<std::size_t>> by_sequence;
  for (std::size_t g = 0; g < truths.size(); ++g) by_sequence[truths[g].sequence].push_back(g);
  std::vector<bool> used(truths.size(), false);

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  double tp = 0.0;
  double seen = 0.0;
  for (const Detection& d : ranked) {
    seen += 1.0;
    double best = -1.0;
    std::size_t best_idx = 0;
    if (auto it = by_sequence.find(d.sequence); it != by_sequence.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const double o = tiou(d.interval, truths[g].interval);
        if (o >= tiou_threshold && o > best) {
          best = o;
          best_idx = g;
        }
      }
    }
    if (best >= 0.0) {
      used[best_idx] = true;
      tp += 1.0;
    }
    precision.push_back(tp / seen);
    recall.push_back(tp / static_cast<double>(truths.size()));
  }
  // precision envelope, then area under the step curve
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

MapResult map_at_tious(const std::vector<Detection>& detections, const std::vector<GroundTruth>& truths,
                       const std::vector<double>& thresholds) {
  std::set<int> classes;
  for (const GroundTruth& g : truths) classes.insert(g.label);
  std::map<int, std::vector<Detection>> det_by_class;
  std::map<int, std::vector<GroundTruth>> gt_by_class;
  for (const Detection& d : detections) det_by_class[d.label].push_back(d);
  for (const GroundTruth& g : truths) gt_by_class[g.label].push_back(g);

  MapResult out;
  out.thresholds = thresholds;
  for (double thr : thresholds) {
    double sum = 0.0;
    for (int c : classes) sum += average_precision(det_by_class[c], gt_by_class[c], thr);
    out.map.push_back(classes.empty() ? 0.0 : sum / static_cast<double>(classes.size()));
  }
  out.average = out.map.empty() ? 0.0 : std::accumulate(out.map.begin(), out.map.end(), 0.0) / out.map.size();
  return out;
}

namespace {

// Integer unit window for a real interval: rounded, inside [0, T], at least k units.
std::pair<int, int> unit_window(const Interval& iv, int length, int k) {
  if (length < k) throw UsageError("cascade: sequence shorter than k");
  int s = std::clamp(static_cast<int>(std::lround(iv.start)), 0, length);
  int e = std::clamp(static_cast<int>(std::lround(iv.end)), 0, length);
  if (e - s < k) {
    const int mid = (s + e) / 2;
    s = std::clamp(mid - k / 2, 0, length - k);
    e = s + k;
  }
  return {s, e};
}

}  // namespace

std::vector<Detection> cascade_infer(const NetworkParams& params, const NetworkConfig& config,
                                     const SyntheticSequence& seq, const std::vector<Interval>& proposals,
                                     int steps) {
  if (steps < 1) throw UsageError("cascade_infer: steps must be >= 1");
  const double length = seq.length();
  std::vector<Detection> out;
  out.reserve(proposals.size());
  for (const Interval& proposal : proposals) {
    Interval current = proposal;
    Detection det;
    det.sequence = seq.id;
    for (int step = 0; step < steps; ++step) {
      const auto [s, e] = unit_window(current, seq.length(), config.parts);
      const PooledFeature feature = featurize(seq, s, e, config.parts);
      const auto [result, tape] = forward(params, config, feature, Mode::Test);
      const Vector probs = softmax(result.class_scores);
      int best = 1;
      for (int c = 2; c < config.num_outputs(); ++c) {
        if (result.class_scores[c] > result.class_scores[best]) best = c;
      }
      const auto& bounds = result.boundaries[static_cast<std::size_t>(best)];
      const double len = current.length();
      Interval refined{std::clamp(current.start + bounds[0].mu * len, 0.0, length),
                       std::clamp(current.end + bounds[1].mu * len, 0.0, length)};
      if (refined.end > refined.start && std::isfinite(refined.start) && std::isfinite(refined.end)) {
        current = refined;
      }
      det.label = best;
      det.score = probs[best];
      det.boundary_variances = std::array<double, 2>{bounds[0].sigma2 * len * len, bounds[1].sigma2 * len * len};
    }
    det.interval = current;
    out.push_back(det);
  }
  return out;
}

std::vector<Detection> detect_dataset(const NetworkParams& params, const NetworkConfig& config, const Dataset& data,
                                      int steps, double nms_threshold) {
  std::vector<std::vector<Interval>> per_sequence(data.sequences.size());
  for (const Proposal& p : data.proposals) {
    per_sequence.at(p.sequence).push_back({static_cast<double>(p.start), static_cast<double>(p.end)});
  }
  std::vector<Detection> all;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    auto dets = cascade_infer(params, config, data.sequences[i], per_sequence[i], steps);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  return nms(std::move(all), nms_threshold);
}

std::vector<GroundTruth> ground_truths(const Dataset& data) {
  std::vector<GroundTruth> out;
  for (const SyntheticSequence& seq : data.sequences) {
    for (const Annotation& a : seq.annotations) {
      out.push_back({seq.id, a.label, {static_cast<double>(a.start), static_cast<double>(a.end)}});
    }
  }
  return out;
}

}  // namespace van
