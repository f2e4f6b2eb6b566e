// SPDX-License-Identifier: Apache-2.0
#include "van/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "van/config.hpp"
#include "van/errors.hpp"
#include "van/eval.hpp"
#include "van/verify.hpp"

namespace van {

namespace {

namespace fs = std::filesystem;

// every numeric key must parse, and the derived configs must be valid, before any file is touched
void check_config(const RunConfig& rc) {
  for (const ConfigKey& key : config_keys()) {
    double unused = 0.0;
    const auto& d = key.default_value;
    if (!d.empty() && std::from_chars(d.data(), d.data() + d.size(), unused).ec == std::errc()) {
      rc.get_double(key.name);
    }
  }
  synth_config_from(rc).validate();
  network_config_from(rc, rc.get_int("dim"), rc.get_int("classes")).validate();
  train_config_from(rc).validate();
}

std::string num(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

struct Context {
  RunConfig rc;
  fs::path out_dir;
  std::string command;
  std::ostream* out = nullptr;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string header(const Context& ctx) { return "# command=" + ctx.command + "\n" + ctx.rc.echo("# "); }

void echo_config(const Context& ctx) {
  ensure_dir(ctx.out_dir);
  write_text(ctx.out_dir / (ctx.command + ".config"), ctx.rc.echo());
  *ctx.out << "effective configuration:\n" << ctx.rc.echo("  ");
}

std::string run_stem(const std::string& variant, int k, std::uint64_t seed) {
  return variant + "_k" + std::to_string(k) + "_s" + std::to_string(seed);
}

fs::path data_file(const Context& ctx, const std::string& split) {
  return fs::path(ctx.rc.get("data")) / (split + ".vands");
}

fs::path checkpoint_path(const Context& ctx) {
  const std::string& explicit_path = ctx.rc.get("checkpoint");
  if (!explicit_path.empty()) return explicit_path;
  return ctx.out_dir / (run_stem(ctx.rc.get("variant"), ctx.rc.get_int("k"), ctx.rc.get_u64("seed")) + ".ckpt");
}

int cmd_gen(Context& ctx) {
  echo_config(ctx);
  const SynthConfig cfg = synth_config_from(ctx.rc);
  const std::uint64_t seed = ctx.rc.get_u64("seed");
  const std::vector<std::pair<std::string, int>> splits{{"train", ctx.rc.get_int("train_sequences")},
                                                        {"test", ctx.rc.get_int("test_sequences")}};
  std::ostringstream summary;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto& [name, count] = splits[i];
    const Dataset data = gen_dataset(cfg, name, derive_seed(seed, i + 1), count);
    const fs::path path = ctx.out_dir / (name + ".vands");
    write_dataset(path.string(), data);
    std::vector<int> actions(static_cast<std::size_t>(cfg.classes) + 1, 0);
    std::vector<int> proposals(static_cast<std::size_t>(cfg.classes) + 1, 0);
    for (const auto& s : data.sequences) {
      for (const auto& a : s.annotations) ++actions[static_cast<std::size_t>(a.label)];
    }
    for (const auto& p : data.proposals) ++proposals[static_cast<std::size_t>(p.label)];
    summary << name << ": " << data.sequences.size() << " sequences, " << data.proposals.size()
            << " proposals -> " << path.string() << "\n";
    summary << "  class  actions  proposals\n";
    for (int c = 0; c <= cfg.classes; ++c) {
      summary << "  " << (c == 0 ? std::string("bg") : std::to_string(c)) << "  "
              << actions[static_cast<std::size_t>(c)] << "  " << proposals[static_cast<std::size_t>(c)] << "\n";
    }
  }
  write_text(ctx.out_dir / "gen_summary.txt", header(ctx) + summary.str());
  *ctx.out << summary.str();
  return kExitOk;
}

int cmd_train(Context& ctx) {
  echo_config(ctx);
  const Dataset data = read_dataset(data_file(ctx, "train").string());
  const NetworkConfig net = network_config_from(ctx.rc, data.config.dim, data.config.classes);
  const TrainConfig tc = train_config_from(ctx.rc);
  const std::vector<TrainingSample> samples = make_samples(data, net.parts);

  Checkpoint ckpt;
  ckpt.config = net;
  ckpt.seed = tc.seed;
  NetworkParams init = build(net, tc.seed);
  *ctx.out << "variant " << to_string(net.variant) << ": " << param_count(init) << " parameters, "
           << samples.size() << " training proposals\n";

  const int report_every = std::max(1, tc.iterations / 10);
  TrainResult result = train(std::move(init), net, samples, tc, [&](int it, const LossBreakdown& l) {
    if ((it + 1) % report_every == 0) {
      *ctx.out << "iter " << it + 1 << " cls=" << num(l.classification) << " reg=" << num(l.regression)
               << " total=" << num(l.total) << "\n";
    }
  });
  ckpt.params = std::move(result.params);

  const std::string stem = run_stem(to_string(net.variant), net.parts, tc.seed);
  const fs::path ckpt_path = ctx.out_dir / (stem + ".ckpt");
  save_checkpoint(ckpt_path.string(), ckpt);

  std::ostringstream csv;
  csv << header(ctx) << "iteration,cls,reg,total\n";
  for (std::size_t i = 0; i < result.curve.size(); ++i) {
    const LossBreakdown& l = result.curve[i];
    csv << i + 1 << "," << num(l.classification) << "," << num(l.regression) << "," << num(l.total) << "\n";
  }
  write_text(ctx.out_dir / (stem + "_loss.csv"), csv.str());
  *ctx.out << "checkpoint -> " << ckpt_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(Context& ctx) {
  echo_config(ctx);
  const fs::path ckpt_path = checkpoint_path(ctx);
  const Checkpoint ckpt = load_checkpoint(ckpt_path.string());
  const Dataset data = read_dataset(data_file(ctx, "test").string());
  if (data.config.dim != ckpt.config.dim || data.config.classes != ckpt.config.classes) {
    throw UsageError("checkpoint and test split disagree on feature dimension or class count");
  }
  const int steps = ctx.rc.get_int("cascade");
  const auto dets = detect_dataset(ckpt.params, ckpt.config, data, steps, ctx.rc.get_double("nms"));
  const MapResult m = map_at_tious(dets, ground_truths(data));

  const std::string variant = to_string(ckpt.config.variant);
  const std::string stem = run_stem(variant, ckpt.config.parts, ckpt.seed) + "_c" + std::to_string(steps);
  const std::string key = variant + "," + std::to_string(ckpt.config.parts) + "," + std::to_string(ckpt.seed) + "," +
                          std::to_string(steps);
  std::ostringstream wide;
  std::ostringstream tall;
  wide << header(ctx) << "# checkpoint=" << ckpt_path.string() << "\nvariant,k,seed,cascade";
  tall << header(ctx) << "# checkpoint=" << ckpt_path.string() << "\nvariant,k,seed,cascade,tiou,map\n";
  for (double t : m.thresholds) wide << ",map@" << num(t);
  wide << ",avg\n" << key;
  for (std::size_t i = 0; i < m.map.size(); ++i) {
    wide << "," << num(m.map[i]);
    tall << key << "," << num(m.thresholds[i]) << "," << num(m.map[i]) << "\n";
  }
  wide << "," << num(m.average) << "\n";
  write_text(ctx.out_dir / (stem + "_map.csv"), wide.str());
  write_text(ctx.out_dir / (stem + "_map_long.csv"), tall.str());

  *ctx.out << "tIoU";
  for (double t : m.thresholds) *ctx.out << "  " << num(t);
  *ctx.out << "  avg\nmAP ";
  for (double v : m.map) *ctx.out << "  " << num(v);
  *ctx.out << "  " << num(m.average) << "\n";
  return kExitOk;
}

int cmd_verify(Context& ctx) {
  echo_config(ctx);
  verify::VerifyOptions opts;
  opts.only = ctx.rc.get("only");
  opts.seed = ctx.rc.get_u64("seed");
  opts.mc_samples = ctx.rc.get_int("mc_samples");
  opts.fd_coordinates = ctx.rc.get_int("fd_coords");
  const auto rows = verify::run(opts);
  write_text(ctx.out_dir / "verify_report.csv", header(ctx) + verify::to_csv(rows));
  for (const auto& r : rows) {
    *ctx.out << (r.asserted ? (r.pass ? "PASS   " : "FAIL   ") : "REPORT ") << r.group << ": " << r.name << " = "
             << num(r.measured);
    if (r.asserted) *ctx.out << " (bound " << num(r.bound) << ")";
    *ctx.out << "\n";
  }
  const bool ok = verify::all_passed(rows);
  *ctx.out << (ok ? "all checks passed\n" : "verification FAILED\n");
  return ok ? kExitOk : kExitVerifyFailed;
}

int cmd_plotdata(Context& ctx) {
  echo_config(ctx);
  const double st2 = ctx.rc.get_double("sigma_t2");
  const int n = ctx.rc.get_int("plot_points");
  const double span = ctx.rc.get_double("plot_mu_span");
  const double var_max = ctx.rc.get_double("plot_var_max");
  if (!(st2 > 0.0) || n < 3 || !(span > 0.0) || !(var_max > 1.0)) {
    throw UsageError("plotdata: need sigma_t2 > 0, plot_points >= 3, plot_mu_span > 0, plot_var_max > 1");
  }
  const double st = std::sqrt(st2);
  const GaussianScalar target{0.0, st2};
  std::vector<double> ratios{0.5};
  for (int j = 0; j < n - 1; ++j) ratios.push_back(std::pow(var_max, static_cast<double>(j) / (n - 2)));
  const double half = (n - 1) / 2.0;

  std::ostringstream csv;
  csv << header(ctx) << "mu_t,sigma2_t,mu_p,sigma2_p,loss,branch\n";
  for (double r : ratios) {
    const double s2 = st2 * r;
    for (int i = 0; i < n; ++i) {
      const double mu = (i - half) / half * span * st;
      const GaussianScalar pred{mu, s2};
      csv << "0," << num(st2) << "," << num(mu) << "," << num(s2) << "," << num(kl_regression_loss(target, pred))
          << "," << (s2 > st2 ? "kl" : "l1") << "\n";
    }
  }
  write_text(ctx.out_dir / "kl_surface.csv", csv.str());
  *ctx.out << "kl_surface.csv: " << ratios.size() * static_cast<std::size_t>(n) << " rows\n";

  if (ctx.rc.get("checkpoint").empty()) return kExitOk;
  const Checkpoint ckpt = load_checkpoint(ctx.rc.get("checkpoint"));
  const Dataset data = read_dataset(data_file(ctx, "test").string());
  // VAN-p exposes propagated variances only with moment propagation switched on.
  const Mode mode = ckpt.config.variant == Variant::VanP ? Mode::Train : Mode::Test;
  std::ostringstream table;
  table << header(ctx)
        << "sequence,start,end,label,pred,score,start_mean,start_var,end_mean,end_var,gt_start,gt_end\n";
  for (const Proposal& p : data.proposals) {
    const auto& seq = data.sequences.at(p.sequence);
    const auto [res, tape] = forward(ckpt.params, ckpt.config, featurize(seq, p, ckpt.config.parts), mode);
    const Vector probs = softmax(res.class_scores);
    int best = 1;
    for (int c = 2; c < ckpt.config.num_outputs(); ++c) {
      if (res.class_scores[c] > res.class_scores[best]) best = c;
    }
    const auto& b = res.boundaries[static_cast<std::size_t>(best)];
    const double len = p.length();
    table << p.sequence << "," << p.start << "," << p.end << "," << p.label << "," << best << ","
          << num(probs[best]) << "," << num(p.start + b[0].mu * len) << "," << num(b[0].sigma2 * len * len) << ","
          << num(p.end + b[1].mu * len) << "," << num(b[1].sigma2 * len * len);
    if (p.target) {
      table << "," << num(p.start + p.target->start.mu * len) << "," << num(p.end + p.target->end.mu * len);
    } else {
      table << ",,";
    }
    table << "\n";
  }
  write_text(ctx.out_dir / "boundary_uncertainty.csv", table.str());
  *ctx.out << "boundary_uncertainty.csv: " << data.proposals.size() << " rows\n";
  return kExitOk;
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variance-aware temporal localisation: data, training, evaluation and verification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every command");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen", "generate the synthetic train/test splits"},
      {"train", "train one variant and write a checkpoint and loss curve"},
      {"eval", "cascade inference, NMS and mAP on the test split"},
      {"verify", "run the oracle verification suite"},
      {"plotdata", "emit loss-surface and boundary-uncertainty tables"},
  };
  std::map<std::string, std::string> given;
  std::string config_path;
  std::string out_dir = ".";
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->add_option("--out", out_dir, "output directory");
    for (const ConfigKey& k : config_keys()) {
      sub->add_option_function<std::string>(
          flag_name(k.name), [&given, key = k.name](const std::string& v) { given[key] = v; },
          k.help + " [" + k.default_value + "]");
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    app.exit(e, msg, msg);
    err << msg.str();
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  Context ctx;
  ctx.out = &out;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) ctx.command = name;
  }
  try {
    if (!config_path.empty()) ctx.rc.load_file(config_path);
    for (const auto& [key, value] : given) ctx.rc.set(key, value);
    check_config(ctx.rc);
    ctx.out_dir = out_dir;
    if (ctx.command == "gen") return cmd_gen(ctx);
    if (ctx.command == "train") return cmd_train(ctx);
    if (ctx.command == "eval") return cmd_eval(ctx);
    if (ctx.command == "verify") return cmd_verify(ctx);
    return cmd_plotdata(ctx);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace van
