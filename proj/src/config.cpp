// SPDX-License-Identifier: Apache-2.0
#include "van/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "van/errors.hpp"

namespace van {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"seed", "1", "seed for data generation, initialisation and shuffling"},
      {"variant", "baseline", "baseline | van_i | van_o | van_p"},
      {"k", "3", "number of pooled parts"},
      {"cascade", "2", "cascade refinement steps at test time"},
      {"lr", "0.001", "learning rate"},
      {"iters", "5000", "training iterations"},
      {"batch", "128", "mini-batch size"},
      {"lambda_reg", "1", "regression loss weight"},
      {"sigma_t2", "0.01", "ground-truth boundary variance"},
      {"optimizer", "sgd-momentum", "sgd | sgd-momentum"},
      {"momentum", "0.9", "momentum coefficient"},
      {"hidden", "256", "FC1 width"},
      {"nms", "0.5", "NMS tIoU threshold"},
      {"data", ".", "directory holding train.vands and test.vands"},
      {"checkpoint", "", "checkpoint file for eval and plotdata"},
      {"classes", "5", "number of action classes"},
      {"dim", "32", "unit feature dimension"},
      {"signal_scale", "0.25", "scale of the class signal vectors"},
      {"sigma_act", "1", "noise inside actions"},
      {"sigma_bg", "1", "background noise"},
      {"jitter", "0.4", "proposal boundary jitter, fraction of action length"},
      {"ramp_fraction", "0.1", "soft boundary ramp, fraction of action length"},
      {"len_min", "16", "shortest action of class 1"},
      {"len_max", "48", "longest action of class 1"},
      {"len_step", "4", "length range shift per class"},
      {"t_min", "240", "shortest sequence"},
      {"t_max", "360", "longest sequence"},
      {"actions_min", "2", "fewest actions per sequence"},
      {"actions_max", "4", "most actions per sequence"},
      {"min_gap", "4", "minimum background units between actions"},
      {"positives_per_action", "4", "jittered proposals per action"},
      {"negatives_per_sequence", "6", "background proposals per sequence"},
      {"min_proposal_len", "4", "shortest generated proposal"},
      {"train_sequences", "200", "sequences in the train split"},
      {"test_sequences", "100", "sequences in the test split"},
      {"only", "", "verify: restrict to one check group"},
      {"mc_samples", "100000", "verify: Monte Carlo sample count"},
      {"fd_coords", "100", "verify: parameter coordinates per gradient check"},
      {"plot_points", "41", "plotdata: grid points per axis"},
      {"plot_mu_span", "20", "plotdata: half-width of the mean axis in sigma_t units"},
      {"plot_var_max", "25", "plotdata: largest predicted variance as a multiple of sigma_t2"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const ConfigKey& k : config_keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  it->second = value;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (values_.find(key) == values_.end()) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    }
    values_[key] = trim(t.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  parse_text(ss.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
std::uint64_t RunConfig::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

std::string RunConfig::echo(const std::string& prefix) const {
  std::ostringstream os;
  for (const ConfigKey& k : config_keys()) os << prefix << k.name << "=" << values_.at(k.name) << "\n";
  return os.str();
}

SynthConfig synth_config_from(const RunConfig& rc) {
  SynthConfig cfg = make_synth_config(rc.get_u64("seed"), rc.get_int("classes"), rc.get_int("dim"),
                                      rc.get_double("signal_scale"), rc.get_int("len_min"), rc.get_int("len_max"),
                                      rc.get_int("len_step"));
  cfg.sigma_act = rc.get_double("sigma_act");
  cfg.sigma_bg = rc.get_double("sigma_bg");
  cfg.jitter = rc.get_double("jitter");
  cfg.ramp_fraction = rc.get_double("ramp_fraction");
  cfg.t_min = rc.get_int("t_min");
  cfg.t_max = rc.get_int("t_max");
  cfg.actions_min = rc.get_int("actions_min");
  cfg.actions_max = rc.get_int("actions_max");
  cfg.min_gap = rc.get_int("min_gap");
  cfg.positives_per_action = rc.get_int("positives_per_action");
  cfg.negatives_per_sequence = rc.get_int("negatives_per_sequence");
  cfg.min_proposal_len = rc.get_int("min_proposal_len");
  cfg.sigma_t2 = rc.get_double("sigma_t2");
  cfg.validate();
  return cfg;
}

NetworkConfig network_config_from(const RunConfig& rc, int dim, int classes) {
  NetworkConfig cfg;
  cfg.variant = parse_variant(rc.get("variant"));
  cfg.dim = dim;
  cfg.parts = rc.get_int("k");
  cfg.hidden = rc.get_int("hidden");
  cfg.classes = classes;
  cfg.sigma_t2 = rc.get_double("sigma_t2");
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from(const RunConfig& rc) {
  TrainConfig cfg;
  cfg.batch = rc.get_int("batch");
  cfg.lr = rc.get_double("lr");
  cfg.iterations = rc.get_int("iters");
  cfg.optimizer = parse_optimizer(rc.get("optimizer"));
  cfg.momentum = rc.get_double("momentum");
  cfg.lambda_reg = rc.get_double("lambda_reg");
  cfg.seed = rc.get_u64("seed");
  cfg.cascade_steps = rc.get_int("cascade");
  cfg.validate();
  return cfg;
}

}  // namespace van
