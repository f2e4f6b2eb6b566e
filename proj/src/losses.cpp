// SPDX-License-Identifier: Apache-2.0
#include "van/losses.hpp"

#include <cmath>
#include <string>

#include "van/errors.hpp"

namespace van {

namespace {

void require_positive(double sigma2, const char* what) {
  if (!(sigma2 > 0.0)) throw DomainError(std::string(what) + ": variance must be positive");
}

// Inner term of the KL-based regression loss: KL(t || p) in terms of s = sigma_p^2.
double kl_term(const GaussianScalar& t, const GaussianScalar& p) {
  const double d = t.mu - p.mu;
  return 0.5 * std::log(p.sigma2 / t.sigma2) + (t.sigma2 + d * d) / (2.0 * p.sigma2) - 0.5;
}

}  // namespace

DetectionGrad DetectionGrad::zeros(int num_outputs) {
  DetectionGrad g;
  g.class_scores = Vector::Zero(num_outputs);
  g.boundary_means.assign(static_cast<std::size_t>(num_outputs), {0.0, 0.0});
  g.boundary_variances.assign(static_cast<std::size_t>(num_outputs), {0.0, 0.0});
  return g;
}

double kl_gaussian(const GaussianScalar& q, const GaussianScalar& p) {
  require_positive(q.sigma2, "kl_gaussian");
  require_positive(p.sigma2, "kl_gaussian");
  const double d = q.mu - p.mu;
  return 0.5 * std::log(q.sigma2 / p.sigma2) + (p.sigma2 + d * d) / (2.0 * q.sigma2) - 0.5;
}

double kl_standard(const GaussianScalar& q, const GaussianScalar& p) {
  require_positive(q.sigma2, "kl_standard");
  require_positive(p.sigma2, "kl_standard");
  const double d = q.mu - p.mu;
  return 0.5 * std::log(p.sigma2 / q.sigma2) + (q.sigma2 + d * d) / (2.0 * p.sigma2) - 0.5;
}

double kl_regression_loss(const GaussianScalar& target, const GaussianScalar& pred) {
  require_positive(target.sigma2, "kl_regression_loss");
  require_positive(pred.sigma2, "kl_regression_loss");
  if (pred.sigma2 <= target.sigma2) {
    return std::abs(target.mu - pred.mu) / std::sqrt(2.0 * target.sigma2);
  }
  return std::sqrt(std::max(0.0, kl_term(target, pred)));
}

RegressionGrad kl_regression_loss_grad(const GaussianScalar& target, const GaussianScalar& pred) {
  require_positive(target.sigma2, "kl_regression_loss_grad");
  require_positive(pred.sigma2, "kl_regression_loss_grad");
  const double d = pred.mu - target.mu;
  if (pred.sigma2 <= target.sigma2) {
    const double scale = 1.0 / std::sqrt(2.0 * target.sigma2);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    return {sign * scale, 0.0};
  }
  const double k = kl_term(target, pred);
  if (!(k > 0.0)) return {0.0, 0.0};
  const double s = pred.sigma2;
  const double dk_dmu = d / s;
  const double dk_ds = 0.5 / s - (target.sigma2 + d * d) / (2.0 * s * s);
  const double outer = 0.5 / std::sqrt(k);
  return {outer * dk_dmu, outer * dk_ds};
}

Vector softmax(const Vector& scores) {
  const double m = scores.maxCoeff();
  Vector e = (scores.array() - m).exp().matrix();
  return e / e.sum();
}

double classification_loss(const Vector& scores, int label) {
  if (label < 0 || label >= scores.size()) {
    throw UsageError("classification_loss: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(scores.size() - 1) + "]");
  }
  const double m = scores.maxCoeff();
  const double lse = m + std::log((scores.array() - m).exp().sum());
  return lse - scores[label];
}

Vector classification_loss_grad(const Vector& scores, int label) {
  if (label < 0 || label >= scores.size()) {
    throw UsageError("classification_loss_grad: label out of range");
  }
  Vector g = softmax(scores);
  g[label] -= 1.0;
  return g;
}

LossBreakdown combined_loss_with_grad(const DetectionResult& det, const Assignment& assignment,
                                      double lambda_reg, DetectionGrad& grad) {
  LossBreakdown out;
  out.lambda_reg = lambda_reg;
  out.classification = classification_loss(det.class_scores, assignment.label);
  grad.class_scores = classification_loss_grad(det.class_scores, assignment.label);

  if (assignment.label != 0 && assignment.target) {
    const auto c = static_cast<std::size_t>(assignment.label);
    const std::array<GaussianScalar, 2> targets{assignment.target->start, assignment.target->end};
    for (std::size_t b = 0; b < 2; ++b) {
      const GaussianScalar& pred = det.boundaries.at(c)[b];
      out.regression += kl_regression_loss(targets[b], pred);
      const RegressionGrad g = kl_regression_loss_grad(targets[b], pred);
      grad.boundary_means[c][b] += lambda_reg * g.d_mu;
      grad.boundary_variances[c][b] += lambda_reg * g.d_sigma2;
    }
  }
  out.total = out.classification + lambda_reg * out.regression;
  return out;
}

LossBreakdown combined_loss(const DetectionResult& det, const Assignment& assignment, double lambda_reg) {
  DetectionGrad scratch = DetectionGrad::zeros(static_cast<int>(det.class_scores.size()));
  return combined_loss_with_grad(det, assignment, lambda_reg, scratch);
}

}  // namespace van
