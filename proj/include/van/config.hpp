// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "van/network.hpp"
#include "van/synth.hpp"
#include "van/train.hpp"

namespace van {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default, in echo order.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value settings. Keys use underscores; command-line flags use the
/// same names with hyphens.
class RunConfig {
 public:
  RunConfig();

  /// Throws UsageError for unknown keys.
  void set(const std::string& key, const std::string& value);
  /// Parses a key=value file ('#' comments and blank lines allowed).
  /// Unknown keys and malformed lines are UsageError; unreadable files IoError.
  void load_file(const std::string& path);
  void parse_text(const std::string& text, const std::string& origin);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// key=value lines for every key, each prefixed by `prefix`.
  std::string echo(const std::string& prefix = "") const;

 private:
  std::map<std::string, std::string> values_;
};

SynthConfig synth_config_from(const RunConfig& rc);
NetworkConfig network_config_from(const RunConfig& rc, int dim, int classes);
TrainConfig train_config_from(const RunConfig& rc);

}  // namespace van
