// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "van/moments.hpp"
#include "van/network.hpp"

namespace van::oracle {

/// Sample statistics of one output coordinate with their standard errors.
struct McEstimate {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double se_mean = 0.0;
  double se_variance = 0.0;  // from the fourth central moment
  std::int64_t n = 0;
};

/// Running central moments up to fourth order; merging is exact in the
/// algebraic sense, so chunked and sequential accumulation agree.
struct StreamingMoments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  void push(double x);
  void merge(const StreamingMoments& other);
  McEstimate estimate() const;
};

using VectorMap = std::function<Vector(const Vector&)>;

/// Draws n independent samples of the diagonal Gaussian `input`, pushes each
/// through `fn`, and returns per-output sample statistics. Samples are drawn
/// in fixed chunks with per-chunk seeds, so the result does not depend on the
/// number of worker threads.
std::vector<McEstimate> mc_propagate(const VectorMap& fn, const MomentVector& input, std::int64_t n,
                                     std::uint64_t seed, int threads = 0);

/// Exact mean and variance of max(0, x) for x ~ N(mu, sigma2).
GaussianScalar relu_exact_moments(const GaussianScalar& x);

double normal_cdf(double z);
double normal_pdf(double z);

/// Numerical KL(q || p) by composite Simpson integration of q log(q/p) over
/// the union of both +-10 sigma supports.
double kl_numeric(const GaussianScalar& q, const GaussianScalar& p, int points_per_sigma = 200);

using ScalarMap = std::function<double(const Vector&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Vector fd_gradient(const ScalarMap& fn, const Vector& point, double step = 1e-5);

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-6);

// Flat view over every trainable scalar, in checkpoint order.
std::int64_t flat_size(const NetworkParams& params);
double& flat_at(NetworkParams& params, std::int64_t index);

}  // namespace van::oracle
