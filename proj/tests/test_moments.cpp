// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "van/errors.hpp"
#include "van/moments.hpp"

using namespace van;

namespace {

// straightforward two-pass reference
std::pair<double, double> naive_mean_var(const std::vector<double>& v) {
  long double sum = 0;
  for (double x : v) sum += x;
  const long double mean = sum / v.size();
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {static_cast<double>(mean), static_cast<double>(ss / v.size())};
}

}  // namespace

TEST_CASE("mean_var_of_window examples") {
  const std::vector<double> one{5.0};
  auto g = mean_var_of_window(one);
  CHECK(g.mu == 5.0);
  CHECK(g.sigma2 == 0.0);

  const std::vector<double> three{1.0, 2.0, 3.0};
  g = mean_var_of_window(three);
  CHECK(g.mu == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(g.sigma2 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const std::vector<double> constant(17, -3.25);
  g = mean_var_of_window(constant);
  CHECK(g.mu == -3.25);
  CHECK(g.sigma2 == 0.0);

  CHECK_THROWS_AS(mean_var_of_window(std::vector<double>{}), DomainError);
}

TEST_CASE("mean_var_of_window is shift equivariant and scale quadratic") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(50 + trial);
    for (double& x : v) x = n(rng);
    const auto base = mean_var_of_window(v);
    std::vector<double> shifted = v;
    std::vector<double> scaled = v;
    for (double& x : shifted) x += 3.5;
    for (double& x : scaled) x *= -2.0;
    const auto s = mean_var_of_window(shifted);
    const auto a = mean_var_of_window(scaled);
    CHECK(s.mu == doctest::Approx(base.mu + 3.5).epsilon(1e-12));
    CHECK(s.sigma2 == doctest::Approx(base.sigma2).epsilon(1e-12));
    CHECK(a.mu == doctest::Approx(-2.0 * base.mu).epsilon(1e-12));
    CHECK(a.sigma2 == doctest::Approx(4.0 * base.sigma2).epsilon(1e-12));
  }
}

TEST_CASE("mean_var_of_window agrees with a naive two-pass reference") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(1.0, 3.0);
  for (int len : {1, 2, 10, 100, 1000, 10000}) {
    std::vector<double> v(static_cast<std::size_t>(len));
    for (double& x : v) x = n(rng);
    const auto g = mean_var_of_window(v);
    const auto [m, var] = naive_mean_var(v);
    CHECK(std::abs(g.mu - m) <= 1e-12 * std::max(1.0, std::abs(m)));
    CHECK(std::abs(g.sigma2 - var) <= 1e-12 * std::max(1e-300, var));
    CHECK(g.sigma2 >= 0.0);
  }
}

TEST_CASE("elementwise_square examples") {
  WeightMatrix w(Matrix{{2.0, -3.0}}, Vector::Constant(2, 1.5));
  auto sq = elementwise_square(w);
  CHECK(sq.values(0, 0) == 4.0);
  CHECK(sq.values(0, 1) == 9.0);
  CHECK(sq.bias.isZero(0.0));

  WeightMatrix id(Matrix::Identity(3, 3), Vector::Zero(3));
  CHECK(elementwise_square(id).values == Matrix::Identity(3, 3));

  WeightMatrix half(Matrix{{0.5}}, Vector::Zero(1));
  CHECK(elementwise_square(half).values(0, 0) == 0.25);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Matrix r(4, 5);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = n(rng);
  CHECK((elementwise_square(WeightMatrix(r, Vector::Zero(5))).values.array() >= 0.0).all());
}

TEST_CASE("clamp_variance examples") {
  const Vector a = clamp_variance(Vector{{0.0, 2.0}}, 1e-12);
  CHECK(a[0] == 1e-12);
  CHECK(a[1] == 2.0);
  CHECK(clamp_variance(Vector{{5.0}}, 0.0)[0] == 5.0);
  CHECK(clamp_variance(Vector{{-1e-15}})[0] == 1e-12);
}

TEST_CASE("MomentVector validates its invariants") {
  CHECK_THROWS_AS(MomentVector(Vector::Zero(2), Vector::Zero(3)), DomainError);
  CHECK_THROWS_AS(MomentVector(Vector::Zero(2), Vector{{1.0, -0.5}}), DomainError);
  CHECK_THROWS_AS(MomentVector(Vector::Zero(1), Vector{{std::nan("")}}), DomainError);
  CHECK_NOTHROW(MomentVector(Vector::Zero(2), Vector::Zero(2)));
}

TEST_CASE("WeightMatrix rejects non-finite values") {
  CHECK_THROWS(WeightMatrix(Matrix::Constant(2, 2, std::nan("")), Vector::Zero(2)));
  CHECK_THROWS(WeightMatrix(Matrix::Zero(2, 2), Vector::Zero(3)));
}

TEST_CASE("dot kernels match a plain sum and ignore appended zeros bitwise") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int len : {1, 3, 4, 7, 64, 1001}) {
    std::vector<double> a(static_cast<std::size_t>(len)), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    long double ref = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ref += static_cast<long double>(a[i]) * b[i];
    const double d = kernels::dot(a.data(), b.data(), len);
    CHECK(std::abs(d - static_cast<double>(ref)) <= 1e-12 * std::max(1.0, std::abs(static_cast<double>(ref))));

    std::vector<double> az = a, bz = b;
    for (int extra = 0; extra < 5; ++extra) {
      az.push_back(0.0);
      bz.push_back(n(rng));
    }
    CHECK(kernels::dot(az.data(), bz.data(), static_cast<Eigen::Index>(az.size())) == d);
  }
}
