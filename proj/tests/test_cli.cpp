// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "van/commands.hpp"
#include "van/losses.hpp"
#include "van/network.hpp"

using namespace van;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "van");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kSmall{"--train-sequences", "4", "--test-sequences", "3", "--dim", "4",
                                      "--hidden", "8", "--iters", "5", "--batch", "8"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b = kSmall) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::path("cli_out") / name;
  fs::remove_all(p);
  return p;
}

std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  return rows;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"gen", "--no-such-flag", "1"}).code == kExitUsage);
  CHECK(run({"gen", "--help"}).code == kExitOk);

  const fs::path dir = fresh("usage");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.cfg") << "# comment\niters=3\nwarp_factor=9\n";
  const Run r = run({"train", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("warp_factor") != std::string::npos);
  std::ofstream(dir / "malformed.cfg") << "iters 3\n";
  CHECK(run({"train", "--config", (dir / "malformed.cfg").string()}).code == kExitUsage);
  CHECK(run({"train", "--config", (dir / "missing.cfg").string()}).code == kExitRuntime);
  CHECK(run({"train", "--iters", "many"}).code == kExitUsage);
  CHECK(run({"train", "--variant", "van_z"}).code == kExitUsage);
}

TEST_CASE("gen writes two splits deterministically") {
  const fs::path a = fresh("gen_a"), b = fresh("gen_b");
  const Run ra = run(with({"gen", "--out", a.string(), "--seed", "4"}));
  REQUIRE(ra.code == kExitOk);
  CHECK(ra.out.find("train: 4 sequences") != std::string::npos);
  CHECK(ra.out.find("test: 3 sequences") != std::string::npos);
  CHECK(fs::exists(a / "train.vands"));
  CHECK(fs::exists(a / "test.vands"));
  CHECK(fs::exists(a / "gen_summary.txt"));
  REQUIRE(run(with({"gen", "--out", b.string(), "--seed", "4"})).code == kExitOk);
  CHECK(slurp(a / "train.vands") == slurp(b / "train.vands"));
  CHECK(slurp(a / "test.vands") == slurp(b / "test.vands"));
  const fs::path c = fresh("gen_c");
  REQUIRE(run(with({"gen", "--out", c.string(), "--seed", "5"})).code == kExitOk);
  CHECK(slurp(a / "train.vands") != slurp(c / "train.vands"));
}

TEST_CASE("config files, overrides and echo") {
  const fs::path dir = fresh("config");
  REQUIRE(run(with({"gen", "--out", dir.string()})).code == kExitOk);
  std::ofstream(dir / "run.cfg") << "iters = 3\nlr=0.01\n";
  const Run r = run(with({"train", "--config", (dir / "run.cfg").string(), "--data", dir.string(), "--out",
                          dir.string(), "--iters", "2"},
                         {"--dim", "4", "--hidden", "8", "--batch", "8"}));
  REQUIRE(r.code == kExitOk);
  const std::string echo = slurp(dir / "train.config");
  CHECK(echo.find("iters=2\n") != std::string::npos);
  CHECK(echo.find("lr=0.01\n") != std::string::npos);
  const std::string loss = slurp(dir / "baseline_k3_s1_loss.csv");
  CHECK(loss.find("# iters=2") != std::string::npos);
  const auto rows = data_rows(loss);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "iteration,cls,reg,total");

  // rerunning from the echoed configuration reproduces the outputs
  const std::string ckpt = slurp(dir / "baseline_k3_s1.ckpt");
  const fs::path again = fresh("config_again");
  REQUIRE(run({"train", "--config", (dir / "train.config").string(), "--out", again.string()}).code == kExitOk);
  CHECK(slurp(again / "baseline_k3_s1.ckpt") == ckpt);
  CHECK(slurp(again / "baseline_k3_s1_loss.csv") == loss);
}

TEST_CASE("train: variants, parameter counts and zero learning rate") {
  const fs::path dir = fresh("train");
  REQUIRE(run(with({"gen", "--out", dir.string()})).code == kExitOk);
  const Run base = run(with({"train", "--data", dir.string(), "--out", dir.string(), "--variant", "baseline"}));
  const Run vp = run(with({"train", "--data", dir.string(), "--out", dir.string(), "--variant", "van_p", "--k", "3"}));
  REQUIRE(base.code == kExitOk);
  REQUIRE(vp.code == kExitOk);
  auto count = [](const std::string& out) {
    const auto p = out.find(" parameters");
    const auto s = out.rfind(' ', p - 1);
    return out.substr(s + 1, p - s - 1);
  };
  CHECK(count(base.out) == count(vp.out));
  CHECK(fs::exists(dir / "van_p_k3_s1.ckpt"));
  CHECK(load_checkpoint((dir / "van_p_k3_s1.ckpt").string()).config.parts == 3);

  REQUIRE(run(with({"train", "--data", dir.string(), "--out", dir.string(), "--variant", "van_o", "--lr", "0",
                    "--seed", "9"}))
              .code == kExitOk);
  const Checkpoint ck = load_checkpoint((dir / "van_o_k3_s9.ckpt").string());
  CHECK(ck.params == build(ck.config, 9));

  CHECK(run(with({"train", "--data", (dir / "nowhere").string(), "--out", dir.string()})).code == kExitRuntime);
}

TEST_CASE("train rejects k larger than a proposal and names it") {
  const fs::path dir = fresh("short");
  const std::vector<std::string> tiny{"--train-sequences", "3", "--test-sequences", "1", "--dim", "2",
                                      "--len-min", "2", "--len-max", "3", "--min-proposal-len", "2",
                                      "--iters", "1", "--hidden", "4"};
  REQUIRE(run(with({"gen", "--out", dir.string()}, tiny)).code == kExitOk);
  const Run r = run(with({"train", "--data", dir.string(), "--out", dir.string(), "--k", "6"}, tiny));
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("proposal [") != std::string::npos);
  CHECK(r.err.find("fewer than k=6") != std::string::npos);
}

TEST_CASE("eval is repeatable and fails on a missing checkpoint") {
  const fs::path dir = fresh("eval");
  REQUIRE(run(with({"gen", "--out", dir.string()})).code == kExitOk);
  REQUIRE(run(with({"train", "--data", dir.string(), "--out", dir.string()})).code == kExitOk);
  REQUIRE(run(with({"eval", "--data", dir.string(), "--out", dir.string()})).code == kExitOk);
  const std::string first = slurp(dir / "baseline_k3_s1_c2_map.csv");
  REQUIRE(run(with({"eval", "--data", dir.string(), "--out", dir.string()})).code == kExitOk);
  CHECK(slurp(dir / "baseline_k3_s1_c2_map.csv") == first);

  const auto rows = data_rows(first);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "variant,k,seed,cascade,map@0.3,map@0.4,map@0.5,map@0.6,map@0.7,avg");
  CHECK(rows[1].rfind("baseline,3,1,2,", 0) == 0);
  CHECK(data_rows(slurp(dir / "baseline_k3_s1_c2_map_long.csv")).size() == 6);

  REQUIRE(run(with({"eval", "--data", dir.string(), "--out", dir.string(), "--cascade", "1"})).code == kExitOk);
  CHECK(fs::exists(dir / "baseline_k3_s1_c1_map.csv"));

  const Run missing = run(with({"eval", "--data", dir.string(), "--out", dir.string(), "--checkpoint",
                                (dir / "absent.ckpt").string()}));
  CHECK(missing.code == kExitRuntime);
  CHECK_FALSE(missing.err.empty());
}

TEST_CASE("verify honours --only") {
  const fs::path dir = fresh("verify");
  const Run r = run({"verify", "--only", "kl", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  const auto rows = data_rows(slurp(dir / "verify_report.csv"));
  REQUIRE(rows.size() > 1);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].rfind("kl,", 0) == 0);
  CHECK(run({"verify", "--only", "nothing", "--out", dir.string()}).code == kExitUsage);
}

TEST_CASE("plotdata loss surface") {
  const fs::path dir = fresh("plot");
  REQUIRE(run({"plotdata", "--out", dir.string()}).code == kExitOk);
  const auto rows = data_rows(slurp(dir / "kl_surface.csv"));
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == "mu_t,sigma2_t,mu_p,sigma2_p,loss,branch");
  std::map<double, std::map<double, double>> grid;  // sigma2 -> mu -> loss
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::string f[6];
    for (auto& x : f) std::getline(in, x, ',');
    grid[std::stod(f[3])][std::stod(f[2])] = std::stod(f[4]);
  }
  const double st2 = 0.01;
  REQUIRE(grid.count(st2) == 1);
  for (const auto& [mu, loss] : grid[st2]) CHECK(std::abs(loss - std::abs(mu) / std::sqrt(2 * st2)) <= 1e-12);
  for (const auto& [s2, row] : grid) {
    for (const auto& [mu, loss] : row) {
      REQUIRE(row.count(-mu) == 1);
      CHECK(row.at(-mu) == loss);
    }
  }
  CHECK(fs::exists(dir / "plotdata.config"));
}
