// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <vector>

#include "van/moments.hpp"

namespace van {

inline constexpr double kDefaultSigmaT2 = 0.01;

/// Ground-truth boundary Gaussians, both with the configured annotation variance.
struct RegressionTarget {
  GaussianScalar start;
  GaussianScalar end;
};

struct Assignment {
  int label = 0;  // 0 is background
  std::optional<RegressionTarget> target;
};

/// Network output for one proposal. boundaries[c] holds (start, end) for class c.
struct DetectionResult {
  Vector class_scores;
  std::vector<std::array<GaussianScalar, 2>> boundaries;
};

/// Gradient of a scalar loss with respect to every DetectionResult entry.
struct DetectionGrad {
  Vector class_scores;
  std::vector<std::array<double, 2>> boundary_means;
  std::vector<std::array<double, 2>> boundary_variances;

  static DetectionGrad zeros(int num_outputs);
};

struct LossBreakdown {
  double classification = 0.0;
  double regression = 0.0;
  double total = 0.0;
  double lambda_reg = 1.0;
};

/// Univariate Gaussian KL in the form log(s_q/s_p) + (s_p^2 + (mu_q-mu_p)^2)/(2 s_q^2) - 1/2.
/// Note the roles: this equals the textbook KL(p || q).
double kl_gaussian(const GaussianScalar& q, const GaussianScalar& p);

/// Textbook KL(q || p) = log(s_p/s_q) + (s_q^2 + (mu_q-mu_p)^2)/(2 s_p^2) - 1/2.
double kl_standard(const GaussianScalar& q, const GaussianScalar& p);

/// sqrt(KL(target || pred)) when pred.sigma2 > target.sigma2, otherwise the
/// scaled L1 |mu_t - mu_p| / sqrt(2 sigma_t^2).
double kl_regression_loss(const GaussianScalar& target, const GaussianScalar& pred);

struct RegressionGrad {
  double d_mu = 0.0;
  double d_sigma2 = 0.0;
};

/// Analytic derivative of kl_regression_loss with respect to the prediction.
/// d_sigma2 is zero in the scaled-L1 branch; d_mu is zero at mu_p == mu_t.
RegressionGrad kl_regression_loss_grad(const GaussianScalar& target, const GaussianScalar& pred);

/// Softmax cross-entropy of the class logits.
double classification_loss(const Vector& scores, int label);
Vector classification_loss_grad(const Vector& scores, int label);
Vector softmax(const Vector& scores);

/// Classification loss plus lambda_reg times the start+end regression losses on
/// the ground-truth class. Background proposals contribute classification only.
LossBreakdown combined_loss(const DetectionResult& det, const Assignment& assignment, double lambda_reg);

/// Same value as combined_loss, plus its gradient with respect to det.
LossBreakdown combined_loss_with_grad(const DetectionResult& det, const Assignment& assignment,
                                      double lambda_reg, DetectionGrad& grad);

}  // namespace van
