// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "van/layers.hpp"
#include "van/losses.hpp"

namespace van {

/// Half-open unit interval [start, end) labelled with a class in 1..C.
struct Annotation {
  int label = 1;
  int start = 0;
  int end = 0;
};

struct SyntheticSequence {
  std::uint32_t id = 0;
  Matrix units;  // T x D
  std::vector<Annotation> annotations;

  int length() const { return static_cast<int>(units.rows()); }
};

struct Proposal {
  std::uint32_t sequence = 0;
  int start = 0;
  int end = 0;
  int label = 0;  // 0 = background
  std::optional<RegressionTarget> target;

  int length() const { return end - start; }
};

struct SynthConfig {
  int t_min = 240;
  int t_max = 360;
  int dim = 32;
  int classes = 5;
  Matrix class_means;  // C x D, row c-1 is the signal of class c
  double sigma_act = 1.0;
  double sigma_bg = 1.0;
  std::vector<int> len_min;  // per class, inclusive
  std::vector<int> len_max;
  int actions_min = 2;
  int actions_max = 4;
  int min_gap = 4;
  double ramp_fraction = 0.1;
  double jitter = 0.4;  // boundary jitter as a fraction of action length
  int positives_per_action = 4;
  int negatives_per_sequence = 6;
  int min_proposal_len = 4;
  double positive_tiou = 0.5;
  double negative_max_tiou = 0.3;
  double sigma_t2 = kDefaultSigmaT2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Human-readable key=value listing of every field.
  std::string echo() const;
};

/// Default benchmark configuration with class signals drawn from seed.
/// Class c gets lengths in [len_min + (c-1) len_step, len_max + (c-1) len_step].
SynthConfig make_synth_config(std::uint64_t seed, int classes = 5, int dim = 32, double signal_scale = 0.25,
                              int len_min = 16, int len_max = 48, int len_step = 4);

/// Stream splitting: independent seed for child `index` of `parent`.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

SyntheticSequence gen_sequence(const SynthConfig& config, std::uint64_t seed, std::uint32_t id = 0);

/// Label and regression target of an interval against a sequence's annotations:
/// class of the max-tIoU annotation when tIoU >= positive_tiou, else background.
Assignment assign_label(int start, int end, const std::vector<Annotation>& annotations, const SynthConfig& config);

std::vector<Proposal> gen_proposals(const SyntheticSequence& seq, const SynthConfig& config, std::uint64_t seed);

/// Context windows of half the proposal length on each side, clipped to the sequence.
PooledFeature featurize(const SyntheticSequence& seq, int start, int end, int k);
PooledFeature featurize(const SyntheticSequence& seq, const Proposal& proposal, int k);

struct Dataset {
  SynthConfig config;
  std::string split;
  std::uint64_t split_seed = 0;
  std::vector<SyntheticSequence> sequences;  // sequences[i].id == i
  std::vector<Proposal> proposals;
};

/// Generates `count` sequences and their proposals. Sequence i uses the stream
/// derive_seed(split_seed, i), so output does not depend on generation order.
Dataset gen_dataset(const SynthConfig& config, const std::string& split, std::uint64_t split_seed, int count);

void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(const std::string& path);

}  // namespace van
