// SPDX-License-Identifier: Apache-2.0
#include "van/oracle.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "van/errors.hpp"
#include "van/synth.hpp"

namespace van::oracle {

void StreamingMoments::push(double x) {
  StreamingMoments one;
  one.n = 1.0;
  one.mean = x;
  merge(one);
}

void StreamingMoments::merge(const StreamingMoments& b) {
  if (b.n == 0.0) return;
  if (n == 0.0) {
    *this = b;
    return;
  }
  const double na = n;
  const double nb = b.n;
  const double nt = na + nb;
  const double d = b.mean - mean;
  const double d2 = d * d;
  const double new_mean = mean + d * nb / nt;
  const double new_m2 = m2 + b.m2 + d2 * na * nb / nt;
  const double new_m3 = m3 + b.m3 + d2 * d * na * nb * (na - nb) / (nt * nt) + 3.0 * d * (na * b.m2 - nb * m2) / nt;
  const double new_m4 = m4 + b.m4 + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (nt * nt * nt) +
                        6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (nt * nt) +
                        4.0 * d * (na * b.m3 - nb * m3) / nt;
  n = nt;
  mean = new_mean;
  m2 = new_m2;
  m3 = new_m3;
  m4 = new_m4;
}

McEstimate StreamingMoments::estimate() const {
  McEstimate e;
  e.n = static_cast<std::int64_t>(n);
  e.mean = mean;
  if (n < 2.0) return e;
  e.variance = m2 / (n - 1.0);
  e.se_mean = std::sqrt(e.variance / n);
  const double mu4 = m4 / n;
  const double var_of_var = (mu4 - (n - 3.0) / (n - 1.0) * e.variance * e.variance) / n;
  e.se_variance = std::sqrt(std::max(0.0, var_of_var));
  return e;
}

std::vector<McEstimate> mc_propagate(const VectorMap& fn, const MomentVector& input, std::int64_t n,
                                     std::uint64_t seed, int threads) {
  if (n < 2) throw DomainError("mc_propagate: need at least 2 samples");
  constexpr std::int64_t kChunk = 4096;
  const std::int64_t chunks = (n + kChunk - 1) / kChunk;
  const Vector stddev = input.variances.cwiseSqrt();
  const Eigen::Index out_dim = fn(input.means).size();

  std::vector<std::vector<StreamingMoments>> partial(static_cast<std::size_t>(chunks),
                                                     std::vector<StreamingMoments>(static_cast<std::size_t>(out_dim)));
  auto run_chunk = [&](std::int64_t c) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& acc = partial[static_cast<std::size_t>(c)];
    const std::int64_t count = std::min(kChunk, n - c * kChunk);
    Vector x(input.size());
    for (std::int64_t s = 0; s < count; ++s) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = input.means[i] + stddev[i] * normal(rng);
      const Vector y = fn(x);
      for (Eigen::Index j = 0; j < out_dim; ++j) acc[static_cast<std::size_t>(j)].push(y[j]);
    }
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::int64_t>(workers, chunks));
  if (workers <= 1) {
    for (std::int64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::int64_t c = next++; c < chunks; c = next++) run_chunk(c);
      });
    }
  }

  std::vector<McEstimate> out;
  out.reserve(static_cast<std::size_t>(out_dim));
  for (Eigen::Index j = 0; j < out_dim; ++j) {
    StreamingMoments total;
    for (const auto& chunk : partial) total.merge(chunk[static_cast<std::size_t>(j)]);
    out.push_back(total.estimate());
  }
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

GaussianScalar relu_exact_moments(const GaussianScalar& x) {
  if (!(x.sigma2 > 0.0)) throw DomainError("relu_exact_moments: variance must be positive");
  const double sigma = std::sqrt(x.sigma2);
  const double z = x.mu / sigma;
  const double cdf = normal_cdf(z);
  const double pdf = normal_pdf(z);
  const double mean = x.mu * cdf + sigma * pdf;
  const double second = (x.mu * x.mu + x.sigma2) * cdf + x.mu * sigma * pdf;
  return {mean, std::max(0.0, second - mean * mean)};
}

double kl_numeric(const GaussianScalar& q, const GaussianScalar& p, int points_per_sigma) {
  if (!(q.sigma2 > 0.0) || !(p.sigma2 > 0.0)) throw DomainError("kl_numeric: variances must be positive");
  const double sq = std::sqrt(q.sigma2);
  const double sp = std::sqrt(p.sigma2);
  const double lo = std::min(q.mu - 10.0 * sq, p.mu - 10.0 * sp);
  const double hi = std::max(q.mu + 10.0 * sq, p.mu + 10.0 * sp);
  const double h_target = std::min(sq, sp) / points_per_sigma;
  auto intervals = static_cast<std::int64_t>(std::ceil((hi - lo) / h_target));
  intervals = std::max<std::int64_t>(intervals + (intervals % 2), 2);
  const double h = (hi - lo) / static_cast<double>(intervals);

  const double log_norm_q = -0.5 * std::log(2.0 * std::numbers::pi * q.sigma2);
  const double log_norm_p = -0.5 * std::log(2.0 * std::numbers::pi * p.sigma2);
  auto integrand = [&](double x) {
    const double lq = log_norm_q - 0.5 * (x - q.mu) * (x - q.mu) / q.sigma2;
    const double lp = log_norm_p - 0.5 * (x - p.mu) * (x - p.mu) / p.sigma2;
    return std::exp(lq) * (lq - lp);
  };
  double sum = integrand(lo) + integrand(hi);
  for (std::int64_t i = 1; i < intervals; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(lo + static_cast<double>(i) * h);
  }
  return sum * h / 3.0;
}

Vector fd_gradient(const ScalarMap& fn, const Vector& point, double step) {
  if (!(step > 0.0)) throw DomainError("fd_gradient: step must be positive");
  Vector g(point.size());
  Vector x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    x[i] = point[i] + step;
    const double up = fn(x);
    x[i] = point[i] - step;
    const double down = fn(x);
    x[i] = point[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DomainError("fd_gradient: non-finite evaluation at coordinate " + std::to_string(i));
    }
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

std::int64_t flat_size(const NetworkParams& params) { return param_count(params); }

double& flat_at(NetworkParams& params, std::int64_t index) {
  std::int64_t i = index;
  auto pick = [&](WeightMatrix& w) -> double* {
    if (i < w.values.size()) return w.values.data() + i;
    i -= w.values.size();
    if (i < w.bias.size()) return w.bias.data() + i;
    i -= w.bias.size();
    return nullptr;
  };
  if (double* p = pick(params.fc1)) return *p;
  if (double* p = pick(params.fc2)) return *p;
  if (params.var_head) {
    if (double* p = pick(*params.var_head)) return *p;
  }
  throw UsageError("flat_at: index " + std::to_string(index) + " out of range");
}

}  // namespace van::oracle
