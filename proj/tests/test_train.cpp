// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "van/errors.hpp"
#include "van/train.hpp"

using namespace van;

namespace {

struct Fixture {
  SynthConfig synth = make_synth_config(3, 3, 6, 1.0);
  Dataset data;
  NetworkConfig net;
  std::vector<TrainingSample> samples;

  explicit Fixture(Variant v, int sequences = 6) {
    synth.t_min = 120;
    synth.t_max = 160;
    synth.sigma_act = 0.5;
    synth.sigma_bg = 0.5;
    synth.jitter = 0.2;
    data = gen_dataset(synth, "train", 17, sequences);
    net.variant = v;
    net.dim = synth.dim;
    net.classes = synth.classes;
    net.parts = 3;
    net.hidden = 16;
    samples = make_samples(data, net.parts);
  }
};

TrainConfig quick(int iterations, double lr = 0.001) {
  TrainConfig t;
  t.batch = 16;
  t.lr = lr;
  t.iterations = iterations;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("learning rate zero leaves parameters unchanged") {
  for (Variant v : {Variant::Baseline, Variant::VanO, Variant::VanP}) {
    Fixture f(v);
    const NetworkParams init = build(f.net, 1);
    const TrainResult r = train(init, f.net, f.samples, quick(25, 0.0));
    CHECK(r.params == init);
    CHECK(r.curve.size() == 25);
  }
}

TEST_CASE("same seed gives identical curves and parameters") {
  for (Variant v : {Variant::Baseline, Variant::VanI, Variant::VanO, Variant::VanP}) {
    Fixture f(v);
    const TrainResult a = train(build(f.net, 1), f.net, f.samples, quick(30));
    const TrainResult b = train(build(f.net, 1), f.net, f.samples, quick(30));
    CHECK(a.params == b.params);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].total == b.curve[i].total);
    TrainConfig other = quick(30);
    other.seed = 6;
    CHECK_FALSE(train(build(f.net, 1), f.net, f.samples, other).params == a.params);
  }
}

TEST_CASE("training reduces the loss") {
  Fixture f(Variant::Baseline);
  const NetworkParams init = build(f.net, 2);
  const TrainResult r = train(init, f.net, f.samples, quick(3000));
  const double before = evaluate_loss(init, f.net, f.samples, 1.0, Mode::Test).total;
  const double after = evaluate_loss(r.params, f.net, f.samples, 1.0, Mode::Test).total;
  CHECK(after < 0.5 * before);
}

TEST_CASE("a single sample is fitted to within 5% of the loss floor") {
  Fixture f(Variant::Baseline, 1);
  std::vector<TrainingSample> one;
  for (const auto& s : f.samples) {
    if (s.assignment.label != 0) {
      one.push_back(s);
      break;
    }
  }
  REQUIRE(one.size() == 1);
  TrainConfig t = quick(3000);
  t.batch = 1;
  const NetworkParams init = build(f.net, 3);
  const TrainResult r = train(init, f.net, one, t);
  // the floor is zero for both terms; measure against the starting loss
  const double start = evaluate_loss(init, f.net, one, 1.0, Mode::Test).total;
  const double end = evaluate_loss(r.params, f.net, one, 1.0, Mode::Test).total;
  CHECK(end <= 0.05 * start);
}

TEST_CASE("loss is mode independent for baseline and van_i") {
  for (Variant v : {Variant::Baseline, Variant::VanI}) {
    Fixture f(v);
    const NetworkParams p = build(f.net, 4);
    const LossBreakdown a = evaluate_loss(p, f.net, f.samples, 1.0, Mode::Train);
    const LossBreakdown b = evaluate_loss(p, f.net, f.samples, 1.0, Mode::Test);
    CHECK(a.total == b.total);
  }
}

TEST_CASE("loss breakdown invariant") {
  Fixture f(Variant::VanP);
  const TrainResult r = train(build(f.net, 1), f.net, f.samples, quick(10));
  for (const LossBreakdown& l : r.curve) {
    CHECK(l.total == doctest::Approx(l.classification + l.lambda_reg * l.regression).epsilon(1e-14));
  }
}

TEST_CASE("divergence and bad configurations are reported") {
  Fixture f(Variant::Baseline);
  CHECK_THROWS_AS(train(build(f.net, 1), f.net, f.samples, quick(200, 1e308)), DivergenceError);
  CHECK_THROWS_AS(train(build(f.net, 1), f.net, {}, quick(1)), UsageError);
  TrainConfig bad = quick(1);
  bad.batch = 0;
  CHECK_THROWS_AS(train(build(f.net, 1), f.net, f.samples, bad), UsageError);
  CHECK_THROWS_AS(parse_optimizer("adam"), UsageError);
  CHECK(parse_optimizer(to_string(Optimizer::Sgd)) == Optimizer::Sgd);
}

TEST_CASE("plain sgd and momentum differ") {
  Fixture f(Variant::Baseline);
  TrainConfig a = quick(20);
  TrainConfig b = quick(20);
  b.optimizer = Optimizer::Sgd;
  CHECK_FALSE(train(build(f.net, 1), f.net, f.samples, a).params == train(build(f.net, 1), f.net, f.samples, b).params);
}
