// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "van/errors.hpp"
#include "van/layers.hpp"
#include "van/losses.hpp"
#include "van/oracle.hpp"
#include "van/verify.hpp"

using namespace van;

namespace {

// E[max(0,x)] and E[max(0,x)^2] by Simpson integration of the density
std::pair<double, double> relu_moments_by_quadrature(double mu, double s2) {
  const double s = std::sqrt(s2);
  const double lo = std::max(0.0, mu - 14 * s), hi = std::max(0.0, mu + 14 * s);
  if (hi <= lo) return {0.0, 0.0};
  const int n = 20000;
  const double h = (hi - lo) / n;
  double m1 = 0, m2 = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    const double pdf = std::exp(-(x - mu) * (x - mu) / (2 * s2)) / std::sqrt(2 * M_PI * s2);
    m1 += w * x * pdf;
    m2 += w * x * x * pdf;
  }
  m1 *= h / 3;
  m2 *= h / 3;
  return {m1, m2 - m1 * m1};
}

MomentVector scalar(double m, double v) { return MomentVector(Vector::Constant(1, m), Vector::Constant(1, v)); }

}  // namespace

TEST_CASE("mc_propagate examples") {
  const auto zero = oracle::mc_propagate([](const Vector& x) { return Vector(2.0 * x); }, scalar(1.5, 0.0), 5000, 1);
  CHECK(zero[0].variance == 0.0);
  CHECK(zero[0].mean == 3.0);

  const auto tail = oracle::mc_propagate([](const Vector& x) { return Vector(x.cwiseMax(0.0)); }, scalar(-5.0, 1.0),
                                         100000, 2);
  CHECK(tail[0].mean < 1e-5);

  const WeightMatrix w(Matrix{{1.0, -2.0}, {0.5, 3.0}}, Vector{{0.1, -0.4}});
  const MomentVector x(Vector{{0.3, -1.2}}, Vector{{0.8, 2.0}});
  const auto [y, t] = linear_forward_moments(w, x);
  const auto mc = oracle::mc_propagate([&](const Vector& s) { return kernels::affine_t(w, s); }, x, 100000, 3);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(mc[static_cast<std::size_t>(j)].mean - y.means[j]) <= 4 * mc[static_cast<std::size_t>(j)].se_mean);
    CHECK(std::abs(mc[static_cast<std::size_t>(j)].variance - y.variances[j]) <=
          4 * mc[static_cast<std::size_t>(j)].se_variance);
    CHECK(mc[static_cast<std::size_t>(j)].n == 100000);
  }
  CHECK_THROWS(oracle::mc_propagate([](const Vector& v) { return v; }, scalar(0, 1), 1, 1));
}

TEST_CASE("mc_propagate does not depend on the thread count") {
  const MomentVector x(Vector{{0.1, 2.0, -1.0}}, Vector{{1.0, 0.5, 3.0}});
  auto fn = [](const Vector& v) { return Vector(v.cwiseMax(0.0)); };
  const auto a = oracle::mc_propagate(fn, x, 50000, 9, 1);
  const auto b = oracle::mc_propagate(fn, x, 50000, 9, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean == b[i].mean);
    CHECK(a[i].variance == b[i].variance);
  }
}

TEST_CASE("streaming moments merge like a single pass") {
  std::mt19937_64 rng(4);
  std::gamma_distribution<double> g(2.0, 1.5);
  std::vector<double> xs(1000);
  for (double& v : xs) v = g(rng);
  oracle::StreamingMoments all, left, right;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    all.push(xs[i]);
    (i < 377 ? left : right).push(xs[i]);
  }
  left.merge(right);
  CHECK(left.mean == doctest::Approx(all.mean).epsilon(1e-13));
  CHECK(left.m2 == doctest::Approx(all.m2).epsilon(1e-12));
  CHECK(left.m3 == doctest::Approx(all.m3).epsilon(1e-10));
  CHECK(left.m4 == doctest::Approx(all.m4).epsilon(1e-11));
  double mean = 0;
  for (double v : xs) mean += v;
  mean /= xs.size();
  double ss = 0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  const auto e = all.estimate();
  CHECK(e.variance == doctest::Approx(ss / (xs.size() - 1)).epsilon(1e-12));
  CHECK(e.se_mean == doctest::Approx(std::sqrt(e.variance / xs.size())).epsilon(1e-12));
  CHECK(e.se_variance > 0.0);
}

TEST_CASE("exact rectified moments") {
  for (double mu : {-3.0, -1.0, -0.2, 0.0, 0.4, 1.7, 5.0}) {
    for (double s2 : {0.1, 1.0, 6.0}) {
      const GaussianScalar e = oracle::relu_exact_moments({mu, s2});
      const auto [m, v] = relu_moments_by_quadrature(mu, s2);
      CHECK(e.mu == doctest::Approx(m).epsilon(1e-9));
      CHECK(e.sigma2 == doctest::Approx(v).epsilon(1e-8));
    }
  }
  const GaussianScalar big = oracle::relu_exact_moments({40.0, 1.0});
  CHECK(big.mu == doctest::Approx(40.0).epsilon(1e-15));
  CHECK(big.sigma2 == doctest::Approx(1.0).epsilon(1e-12));
  const GaussianScalar small = oracle::relu_exact_moments({-40.0, 1.0});
  CHECK(small.mu == doctest::Approx(0.0));
  CHECK(small.sigma2 >= 0.0);
  const GaussianScalar centred = oracle::relu_exact_moments({0.0, 1.0});
  CHECK(centred.mu == doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-14));
  CHECK(centred.sigma2 == doctest::Approx(0.5 - 1.0 / (2 * M_PI)).epsilon(1e-14));
}

TEST_CASE("numerical KL matches the closed forms") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> mu(-2, 2), var(0.1, 4);
  for (int i = 0; i < 100; ++i) {
    const GaussianScalar q{mu(rng), var(rng)}, p{mu(rng), var(rng)};
    CHECK(std::abs(oracle::kl_numeric(q, p) - kl_standard(q, p)) <= 1e-6);
  }
  CHECK(oracle::kl_numeric({0, 1}, {0, 1}) == doctest::Approx(0.0));
}

TEST_CASE("fd_gradient and relative_error") {
  const Vector x{{0.5, -1.5, 2.0}};
  const Vector g = oracle::fd_gradient([](const Vector& v) { return v.squaredNorm() + v[0] * v[1]; }, x);
  CHECK(g[0] == doctest::Approx(2 * 0.5 - 1.5).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(-3.0 + 0.5).epsilon(1e-8));
  CHECK(g[2] == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(oracle::relative_error(1.0, 1.0) == 0.0);
  CHECK(oracle::relative_error(2.0, 1.0) == 0.5);
  CHECK(oracle::relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
  CHECK_THROWS_AS(oracle::fd_gradient([](const Vector& v) { return std::log(v[0]); }, Vector{{0.0}}), DomainError);
}

TEST_CASE("a wrong-sign variance backward is caught by the gradient check") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  Matrix w(5, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  const WeightMatrix layer(w, Vector::Zero(3));
  const verify::MomentForward fwd = [&](const MomentVector& x) { return linear_forward_moments(layer, x).first; };
  const verify::MomentBackward good = [&](const MomentVector& x, const Vector& gm, const Vector& gv) {
    auto [y, t] = linear_forward_moments(layer, x);
    return linear_backward(t, layer, gm, gv).input;
  };
  // injected bug: the variance stream's input gradient uses -(W o W)
  const verify::MomentBackward flipped = [&](const MomentVector& x, const Vector& gm, const Vector& gv) {
    MomentGrad g = good(x, gm, gv);
    g.variances = -g.variances;
    return g;
  };
  const MomentVector x(Vector{{0.2, -0.7, 1.1, 0.4, -0.3}}, Vector{{0.5, 0.1, 0.9, 1.3, 0.2}});
  CHECK(verify::layer_gradient_check(fwd, good, x, 3) <= 1e-4);
  CHECK(verify::layer_gradient_check(fwd, flipped, x, 3) > 1e-4);
}

TEST_CASE("flat parameter view covers every parameter once") {
  NetworkConfig c;
  c.variant = Variant::VanO;
  c.dim = 2;
  c.parts = 1;
  c.hidden = 3;
  c.classes = 2;
  NetworkParams p = build(c, 1).zeros_like();
  const std::int64_t n = oracle::flat_size(p);
  CHECK(n == param_count(p));
  for (std::int64_t i = 0; i < n; ++i) oracle::flat_at(p, i) += static_cast<double>(i + 1);
  double sum = p.fc1.values.sum() + p.fc1.bias.sum() + p.fc2.values.sum() + p.fc2.bias.sum() +
               p.var_head->values.sum() + p.var_head->bias.sum();
  CHECK(sum == doctest::Approx(n * (n + 1) / 2.0));
  CHECK_THROWS(oracle::flat_at(p, n));
}

TEST_CASE("verification suite passes and filters by group") {
  verify::VerifyOptions o;
  o.mc_samples = 20000;
  o.affine_layers = 10;
  const auto all = verify::run(o);
  CHECK(verify::all_passed(all));
  o.only = "kl";
  const auto kl = verify::run(o);
  CHECK_FALSE(kl.empty());
  for (const auto& r : kl) CHECK(r.group == "kl");
  o.only = "nope";
  CHECK_THROWS_AS(verify::run(o), UsageError);
}
