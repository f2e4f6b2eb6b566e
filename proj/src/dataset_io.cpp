// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "van/binary_io.hpp"
#include "van/synth.hpp"

namespace van {

namespace {

constexpr char kMagic[9] = "VANDATA\0";
constexpr std::uint32_t kVersion = 1;

void write_config(std::ostream& os, const SynthConfig& c) {
  io::write_string(os, c.echo());
  for (int v : {c.t_min, c.t_max, c.dim, c.classes}) io::write_pod<std::int32_t>(os, v);
  for (Eigen::Index r = 0; r < c.class_means.rows(); ++r) {
    for (Eigen::Index d = 0; d < c.class_means.cols(); ++d) io::write_pod<double>(os, c.class_means(r, d));
  }
  io::write_pod<double>(os, c.sigma_act);
  io::write_pod<double>(os, c.sigma_bg);
  for (int v : c.len_min) io::write_pod<std::int32_t>(os, v);
  for (int v : c.len_max) io::write_pod<std::int32_t>(os, v);
  for (int v : {c.actions_min, c.actions_max, c.min_gap}) io::write_pod<std::int32_t>(os, v);
  io::write_pod<double>(os, c.ramp_fraction);
  io::write_pod<double>(os, c.jitter);
  for (int v : {c.positives_per_action, c.negatives_per_sequence, c.min_proposal_len}) {
    io::write_pod<std::int32_t>(os, v);
  }
  io::write_pod<double>(os, c.positive_tiou);
  io::write_pod<double>(os, c.negative_max_tiou);
  io::write_pod<double>(os, c.sigma_t2);
  io::write_pod<std::uint64_t>(os, c.seed);
}

SynthConfig read_config(std::istream& is) {
  io::read_string(is);  // echo; regenerated from the fields on write
  SynthConfig c;
  c.t_min = io::read_pod<std::int32_t>(is);
  c.t_max = io::read_pod<std::int32_t>(is);
  c.dim = io::read_pod<std::int32_t>(is);
  c.classes = io::read_pod<std::int32_t>(is);
  if (c.dim < 1 || c.classes < 1 || c.dim > (1 << 20) || c.classes > (1 << 16)) {
    throw IoError("dataset: implausible dimensions in header");
  }
  c.class_means.resize(c.classes, c.dim);
  for (Eigen::Index r = 0; r < c.class_means.rows(); ++r) {
    for (Eigen::Index d = 0; d < c.class_means.cols(); ++d) c.class_means(r, d) = io::read_pod<double>(is);
  }
  c.sigma_act = io::read_pod<double>(is);
  c.sigma_bg = io::read_pod<double>(is);
  c.len_min.resize(static_cast<std::size_t>(c.classes));
  c.len_max.resize(static_cast<std::size_t>(c.classes));
  for (int& v : c.len_min) v = io::read_pod<std::int32_t>(is);
  for (int& v : c.len_max) v = io::read_pod<std::int32_t>(is);
  c.actions_min = io::read_pod<std::int32_t>(is);
  c.actions_max = io::read_pod<std::int32_t>(is);
  c.min_gap = io::read_pod<std::int32_t>(is);
  c.ramp_fraction = io::read_pod<double>(is);
  c.jitter = io::read_pod<double>(is);
  c.positives_per_action = io::read_pod<std::int32_t>(is);
  c.negatives_per_sequence = io::read_pod<std::int32_t>(is);
  c.min_proposal_len = io::read_pod<std::int32_t>(is);
  c.positive_tiou = io::read_pod<double>(is);
  c.negative_max_tiou = io::read_pod<double>(is);
  c.sigma_t2 = io::read_pod<double>(is);
  c.seed = io::read_pod<std::uint64_t>(is);
  return c;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, 8);
  io::write_pod<std::uint32_t>(os, kVersion);
  write_config(os, data.config);
  io::write_string(os, data.split);
  io::write_pod<std::uint64_t>(os, data.split_seed);

  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(data.sequences.size()));
  for (const SyntheticSequence& seq : data.sequences) {
    io::write_pod<std::uint32_t>(os, seq.id);
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seq.units.rows()));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seq.units.cols()));
    for (Eigen::Index t = 0; t < seq.units.rows(); ++t) {
      for (Eigen::Index d = 0; d < seq.units.cols(); ++d) io::write_pod<double>(os, seq.units(t, d));
    }
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seq.annotations.size()));
    for (const Annotation& a : seq.annotations) {
      io::write_pod<std::int32_t>(os, a.label);
      io::write_pod<std::int32_t>(os, a.start);
      io::write_pod<std::int32_t>(os, a.end);
    }
  }

  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(data.proposals.size()));
  for (const Proposal& p : data.proposals) {
    io::write_pod<std::uint32_t>(os, p.sequence);
    io::write_pod<std::int32_t>(os, p.start);
    io::write_pod<std::int32_t>(os, p.end);
    io::write_pod<std::int32_t>(os, p.label);
    io::write_pod<std::uint8_t>(os, p.target ? 1 : 0);
    if (p.target) {
      io::write_pod<double>(os, p.target->start.mu);
      io::write_pod<double>(os, p.target->start.sigma2);
      io::write_pod<double>(os, p.target->end.mu);
      io::write_pod<double>(os, p.target->end.sigma2);
    }
  }
  if (!os) throw IoError("write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path + "'");
  io::expect_magic(is, kMagic, "dataset '" + path + "'");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kVersion) throw IoError("dataset: unsupported version " + std::to_string(version));
  Dataset data;
  data.config = read_config(is);
  data.split = io::read_string(is, 256);
  data.split_seed = io::read_pod<std::uint64_t>(is);

  const auto nseq = io::read_pod<std::uint32_t>(is);
  data.sequences.resize(nseq);
  for (SyntheticSequence& seq : data.sequences) {
    seq.id = io::read_pod<std::uint32_t>(is);
    const auto rows = io::read_pod<std::uint32_t>(is);
    const auto cols = io::read_pod<std::uint32_t>(is);
    if (static_cast<int>(cols) != data.config.dim) throw IoError("dataset: unit dimension mismatch");
    seq.units.resize(rows, cols);
    for (Eigen::Index t = 0; t < seq.units.rows(); ++t) {
      for (Eigen::Index d = 0; d < seq.units.cols(); ++d) seq.units(t, d) = io::read_pod<double>(is);
    }
    seq.annotations.resize(io::read_pod<std::uint32_t>(is));
    for (Annotation& a : seq.annotations) {
      a.label = io::read_pod<std::int32_t>(is);
      a.start = io::read_pod<std::int32_t>(is);
      a.end = io::read_pod<std::int32_t>(is);
    }
  }

  data.proposals.resize(io::read_pod<std::uint32_t>(is));
  for (Proposal& p : data.proposals) {
    p.sequence = io::read_pod<std::uint32_t>(is);
    p.start = io::read_pod<std::int32_t>(is);
    p.end = io::read_pod<std::int32_t>(is);
    p.label = io::read_pod<std::int32_t>(is);
    if (io::read_pod<std::uint8_t>(is) != 0) {
      RegressionTarget t;
      t.start.mu = io::read_pod<double>(is);
      t.start.sigma2 = io::read_pod<double>(is);
      t.end.mu = io::read_pod<double>(is);
      t.end.sigma2 = io::read_pod<double>(is);
      p.target = t;
    }
    if (p.sequence >= data.sequences.size()) throw IoError("dataset: proposal refers to unknown sequence");
  }
  return data;
}

}  // namespace van
