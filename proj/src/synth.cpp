// SPDX-License-Identifier: Apache-2.0
#include "van/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "van/errors.hpp"
#include "van/interval.hpp"

namespace van {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  // splitmix64 finaliser over a combination of both inputs
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw UsageError("SynthConfig: " + msg); };
  if (t_min < 1 || t_max < t_min) fail("need 1 <= t_min <= t_max");
  if (dim < 1 || classes < 1) fail("dim and classes must be >= 1");
  if (class_means.rows() != classes || class_means.cols() != dim) fail("class_means must be C x D");
  if (!(sigma_act >= 0.0) || !(sigma_bg >= 0.0)) fail("noise levels must be >= 0");
  if (static_cast<int>(len_min.size()) != classes || static_cast<int>(len_max.size()) != classes) {
    fail("per-class length ranges must have C entries");
  }
  for (int c = 0; c < classes; ++c) {
    if (len_min[c] < 1 || len_max[c] < len_min[c]) fail("invalid length range for class " + std::to_string(c + 1));
    if (len_max[c] > t_min) fail("actions of class " + std::to_string(c + 1) + " may not fit in a sequence");
  }
  if (actions_min < 0 || actions_max < actions_min) fail("need 0 <= actions_min <= actions_max");
  if (min_gap < 0) fail("min_gap must be >= 0");
  if (!(ramp_fraction >= 0.0 && ramp_fraction <= 0.5)) fail("ramp_fraction must be in [0, 0.5]");
  if (!(jitter >= 0.0)) fail("jitter must be >= 0");
  if (positives_per_action < 0 || negatives_per_sequence < 0) fail("proposal counts must be >= 0");
  if (min_proposal_len < 1) fail("min_proposal_len must be >= 1");
  if (!(positive_tiou > 0.0 && positive_tiou <= 1.0)) fail("positive_tiou must be in (0, 1]");
  if (!(sigma_t2 > 0.0)) fail("sigma_t2 must be positive");
}

std::string SynthConfig::echo() const {
  std::ostringstream os;
  os << "t_min=" << t_min << "\n"
     << "t_max=" << t_max << "\n"
     << "dim=" << dim << "\n"
     << "classes=" << classes << "\n"
     << "sigma_act=" << fmt_double(sigma_act) << "\n"
     << "sigma_bg=" << fmt_double(sigma_bg) << "\n";
  for (int c = 0; c < classes; ++c) {
    os << "class_" << c + 1 << "_len=" << len_min[static_cast<std::size_t>(c)] << ".."
       << len_max[static_cast<std::size_t>(c)] << "\n";
  }
  os << "actions=" << actions_min << ".." << actions_max << "\n"
     << "min_gap=" << min_gap << "\n"
     << "ramp_fraction=" << fmt_double(ramp_fraction) << "\n"
     << "jitter=" << fmt_double(jitter) << "\n"
     << "positives_per_action=" << positives_per_action << "\n"
     << "negatives_per_sequence=" << negatives_per_sequence << "\n"
     << "min_proposal_len=" << min_proposal_len << "\n"
     << "positive_tiou=" << fmt_double(positive_tiou) << "\n"
     << "negative_max_tiou=" << fmt_double(negative_max_tiou) << "\n"
     << "sigma_t2=" << fmt_double(sigma_t2) << "\n"
     << "seed=" << seed << "\n";
  return os.str();
}

SynthConfig make_synth_config(std::uint64_t seed, int classes, int dim, double signal_scale, int len_min,
                              int len_max, int len_step) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.classes = classes;
  cfg.dim = dim;
  cfg.class_means.resize(classes, dim);
  std::mt19937_64 rng(derive_seed(seed, 0x5167));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 0; c < classes; ++c) {
    for (int d = 0; d < dim; ++d) cfg.class_means(c, d) = signal_scale * normal(rng);
  }
  for (int c = 0; c < classes; ++c) {
    cfg.len_min.push_back(len_min + c * len_step);
    cfg.len_max.push_back(len_max + c * len_step);
  }
  return cfg;
}

SyntheticSequence gen_sequence(const SynthConfig& config, std::uint64_t seed, std::uint32_t id) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SyntheticSequence seq;
  seq.id = id;
  const int length = uniform_int(rng, config.t_min, config.t_max);

  // classes and lengths first, then drop trailing actions that cannot fit
  const int wanted = uniform_int(rng, config.actions_min, config.actions_max);
  std::vector<Annotation> actions;
  int used = config.min_gap;
  for (int a = 0; a < wanted; ++a) {
    Annotation ann;
    ann.label = uniform_int(rng, 1, config.classes);
    const auto c = static_cast<std::size_t>(ann.label - 1);
    ann.end = uniform_int(rng, config.len_min[c], config.len_max[c]);  // length for now
    if (used + ann.end + config.min_gap > length) break;
    used += ann.end + config.min_gap;
    actions.push_back(ann);
  }
  // distribute the slack over the n+1 gaps
  const int slack = length - used;
  std::vector<int> cuts(actions.size());
  for (int& cut : cuts) cut = uniform_int(rng, 0, slack);
  std::sort(cuts.begin(), cuts.end());
  int cursor = 0;
  int prev_cut = 0;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    cursor += config.min_gap + (cuts[a] - prev_cut);
    prev_cut = cuts[a];
    const int len = actions[a].end;
    actions[a].start = cursor;
    actions[a].end = cursor + len;
    cursor += len;
  }

  seq.units.resize(length, config.dim);
  for (int t = 0; t < length; ++t) {
    for (int d = 0; d < config.dim; ++d) seq.units(t, d) = config.sigma_bg * normal(rng);
  }
  for (const Annotation& ann : actions) {
    const int len = ann.end - ann.start;
    const int ramp = static_cast<int>(std::lround(config.ramp_fraction * len));
    const auto signal = config.class_means.row(ann.label - 1);
    for (int u = 0; u < len; ++u) {
      const double alpha =
          std::min({1.0, static_cast<double>(u + 1) / (ramp + 1), static_cast<double>(len - u) / (ramp + 1)});
      for (int d = 0; d < config.dim; ++d) {
        seq.units(ann.start + u, d) = alpha * signal[d] + config.sigma_act * normal(rng);
      }
    }
  }
  seq.annotations = std::move(actions);
  return seq;
}

Assignment assign_label(int start, int end, const std::vector<Annotation>& annotations, const SynthConfig& config) {
  Assignment out;
  double best = 0.0;
  const Annotation* match = nullptr;
  for (const Annotation& ann : annotations) {
    const double overlap = tiou({static_cast<double>(start), static_cast<double>(end)},
                                {static_cast<double>(ann.start), static_cast<double>(ann.end)});
    if (overlap > best) {
      best = overlap;
      match = &ann;
    }
  }
  if (match == nullptr || best < config.positive_tiou) return out;
  const double len = end - start;
  out.label = match->label;
  out.target = RegressionTarget{{(match->start - start) / len, config.sigma_t2},
                                {(match->end - end) / len, config.sigma_t2}};
  return out;
}

std::vector<Proposal> gen_proposals(const SyntheticSequence& seq, const SynthConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int length = seq.length();
  std::vector<Proposal> out;

  auto push = [&](int s, int e) {
    Proposal p;
    p.sequence = seq.id;
    p.start = s;
    p.end = e;
    const Assignment a = assign_label(s, e, seq.annotations, config);
    p.label = a.label;
    p.target = a.target;
    out.push_back(p);
  };

  for (const Annotation& ann : seq.annotations) {
    const double len = ann.end - ann.start;
    for (int i = 0; i < config.positives_per_action; ++i) {
      int s = ann.start;
      int e = ann.end;
      for (int attempt = 0; attempt < 20; ++attempt) {
        const int cs = std::clamp(ann.start + static_cast<int>(std::lround(unit(rng) * config.jitter * len)), 0, length);
        const int ce = std::clamp(ann.end + static_cast<int>(std::lround(unit(rng) * config.jitter * len)), 0, length);
        if (ce - cs >= config.min_proposal_len) {
          s = cs;
          e = ce;
          break;
        }
      }
      push(s, e);
    }
  }

  int shortest = config.len_min.empty() ? config.min_proposal_len : *std::min_element(config.len_min.begin(), config.len_min.end());
  int longest = config.len_max.empty() ? shortest : *std::max_element(config.len_max.begin(), config.len_max.end());
  shortest = std::max(shortest, config.min_proposal_len);
  longest = std::min(std::max(longest, shortest), length);
  for (int i = 0; i < config.negatives_per_sequence && shortest <= length; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const int len = uniform_int(rng, shortest, longest);
      const int s = uniform_int(rng, 0, length - len);
      double overlap = 0.0;
      for (const Annotation& ann : seq.annotations) {
        overlap = std::max(overlap, tiou({double(s), double(s + len)}, {double(ann.start), double(ann.end)}));
      }
      if (overlap < config.negative_max_tiou) {
        push(s, s + len);
        break;
      }
    }
  }
  return out;
}

PooledFeature featurize(const SyntheticSequence& seq, int start, int end, int k) {
  const int length = end - start;
  if (start < 0 || end > seq.length() || length < 1) {
    throw UsageError("featurize: proposal [" + std::to_string(start) + ", " + std::to_string(end) +
                     ") lies outside sequence " + std::to_string(seq.id) + " of length " +
                     std::to_string(seq.length()));
  }
  if (length < k) {
    throw UsageError("featurize: proposal [" + std::to_string(start) + ", " + std::to_string(end) + ") of sequence " +
                     std::to_string(seq.id) + " has " + std::to_string(length) + " units, fewer than k=" +
                     std::to_string(k));
  }
  const int context = length / 2;
  const int before = std::min(context, start);
  const int after = std::min(context, seq.length() - end);
  return vap_pool(seq.units.middleRows(start - before, before + length + after), k, before, after);
}

PooledFeature featurize(const SyntheticSequence& seq, const Proposal& proposal, int k) {
  return featurize(seq, proposal.start, proposal.end, k);
}

Dataset gen_dataset(const SynthConfig& config, const std::string& split, std::uint64_t split_seed, int count) {
  config.validate();
  Dataset data;
  data.config = config;
  data.split = split;
  data.split_seed = split_seed;
  data.sequences.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(split_seed, static_cast<std::uint64_t>(i));
    data.sequences.push_back(gen_sequence(config, s, static_cast<std::uint32_t>(i)));
    auto props = gen_proposals(data.sequences.back(), config, derive_seed(s, 0xB0B));
    data.proposals.insert(data.proposals.end(), props.begin(), props.end());
  }
  return data;
}

}  // namespace van
