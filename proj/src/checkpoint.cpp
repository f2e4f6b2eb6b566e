// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "van/binary_io.hpp"
#include "van/network.hpp"

namespace van {

namespace {

constexpr char kMagic[9] = "VANCKPT\0";
constexpr std::uint32_t kVersion = 1;

void write_tensor(std::ostream& os, const std::string& name, const Matrix& m) {
  io::write_string(os, name);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_pod<double>(os, m(r, c));
  }
}

Matrix read_tensor(std::istream& is, const std::string& expected_name) {
  const std::string name = io::read_string(is);
  if (name != expected_name) throw IoError("checkpoint: expected tensor '" + expected_name + "', found '" + name + "'");
  const auto rows = io::read_pod<std::uint32_t>(is);
  const auto cols = io::read_pod<std::uint32_t>(is);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::read_pod<double>(is);
  }
  return m;
}

void write_layer(std::ostream& os, const std::string& name, const WeightMatrix& w) {
  write_tensor(os, name + ".weight", w.values);
  write_tensor(os, name + ".bias", w.bias.transpose());
}

WeightMatrix read_layer(std::istream& is, const std::string& name) {
  Matrix w = read_tensor(is, name + ".weight");
  Matrix b = read_tensor(is, name + ".bias");
  if (b.rows() != 1 || b.cols() != w.cols()) throw IoError("checkpoint: bias shape mismatch for " + name);
  return WeightMatrix(std::move(w), b.row(0).transpose());
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, 8);
  io::write_pod<std::uint32_t>(os, kVersion);
  io::write_string(os, to_string(ckpt.config.variant));
  io::write_pod<std::int32_t>(os, ckpt.config.dim);
  io::write_pod<std::int32_t>(os, ckpt.config.parts);
  io::write_pod<std::int32_t>(os, ckpt.config.hidden);
  io::write_pod<std::int32_t>(os, ckpt.config.classes);
  io::write_pod<double>(os, ckpt.config.sigma_t2);
  io::write_pod<std::uint64_t>(os, ckpt.seed);
  const std::uint32_t tensors = ckpt.params.var_head ? 6 : 4;
  io::write_pod<std::uint32_t>(os, tensors);
  write_layer(os, "fc1", ckpt.params.fc1);
  write_layer(os, "fc2", ckpt.params.fc2);
  if (ckpt.params.var_head) write_layer(os, "var_head", *ckpt.params.var_head);
  if (!os) throw IoError("write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  io::expect_magic(is, kMagic, "checkpoint '" + path + "'");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config.variant = parse_variant(io::read_string(is, 64));
  ckpt.config.dim = io::read_pod<std::int32_t>(is);
  ckpt.config.parts = io::read_pod<std::int32_t>(is);
  ckpt.config.hidden = io::read_pod<std::int32_t>(is);
  ckpt.config.classes = io::read_pod<std::int32_t>(is);
  ckpt.config.sigma_t2 = io::read_pod<double>(is);
  ckpt.seed = io::read_pod<std::uint64_t>(is);
  const auto tensors = io::read_pod<std::uint32_t>(is);
  ckpt.params.fc1 = read_layer(is, "fc1");
  ckpt.params.fc2 = read_layer(is, "fc2");
  if (tensors == 6) ckpt.params.var_head = read_layer(is, "var_head");
  else if (tensors != 4) throw IoError("checkpoint: unexpected tensor count");
  ckpt.config.validate();
  if (ckpt.params.fc1.rows() != ckpt.config.input_dim() || ckpt.params.fc1.cols() != ckpt.config.hidden) {
    throw IoError("checkpoint: fc1 shape does not match header");
  }
  return ckpt;
}

}  // namespace van
